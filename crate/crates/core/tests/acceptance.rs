//! Acceptance suite: property-based oracle equivalence plus the exactly
//! assertable structural bounds, one test (and one printed pass/fail line)
//! per criterion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use minplus::addcomb::{
    difference_set, doubling_constant, greedy_cover, greedy_cover_bound, hash_exists_oracle,
    iterated_sumset, popular_sum_decomposition, sum_order_hash_search, sumset,
    verify_sum_order_preserving, HashSearchOutcome, IntegerSet,
};
use minplus::graph::WeightedGraph;
use minplus::intermediate::{
    min_eq_brute, min_plus_to_apsp_graph, min_product_brute, min_witness_brute,
    monotone_bd_transform, node_weighted_gadget, rank_substitution_bd_reduction,
    reduce_minplus_to_min_equality, reduce_minplus_to_min_product, reduce_minplus_to_min_witness,
    ApspGadgetVariant,
};
use minplus::matrix::{
    exact_triangle_brute, is_partition, min_plus_brute, min_plus_small_universe,
    min_plus_via_exact_triangle, min_plus_witnesses_brute, MaskedMatrix,
};
use minplus::rank::{
    conflict_free_cover, verify_cover, verify_decomposition, CoverInstance, Cover,
    RankDecomposition, RegularityReport,
};
use minplus::reductions::{
    hash_universe_compression, list_witnesses_min_plus, small_universe_reduction_with_stats,
};
use minplus::triangle::{
    list_witnesses_exact_triangle, recount_tag, reduce_low_rank_to_low_doubling,
    reduce_low_rank_to_slice_uniform, reduce_low_rank_to_uniform_regular,
    reduce_slice_uniform_to_uniform, reduce_uniform_regular_to_low_doubling, solve_low_rank,
    solve_uniform_low_doubling, verify_potential_adjustment, verify_reduction_output,
    witness_census, Knobs, TargetedDecomposition,
};
use minplus::{Result, TriangleInstance};

// ---------------------------------------------------------------------------
// Corpus helpers
// ---------------------------------------------------------------------------

fn random_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: i64,
    hi: i64,
    bot_rate: f64,
) -> MaskedMatrix {
    let mut m = MaskedMatrix::all_bot(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            if rng.gen::<f64>() >= bot_rate {
                m.set(i, j, Some(rng.gen_range(lo..=hi)));
            }
        }
    }
    m
}

/// Random product pair within the criterion-1 caps.
fn random_product(rng: &mut ChaCha8Rng, u_max: i64) -> (MaskedMatrix, MaskedMatrix) {
    let n1 = rng.gen_range(2..=12);
    let n2 = rng.gen_range(2..=8);
    let n3 = rng.gen_range(2..=12);
    let u = rng.gen_range(1..=u_max);
    let a = random_matrix(rng, n1, n2, 0, u, 0.2);
    let b = random_matrix(rng, n2, n3, 0, u, 0.2);
    (a, b)
}

fn random_triangle(rng: &mut ChaCha8Rng, u: i64, plant: usize) -> TriangleInstance {
    let n1 = rng.gen_range(2..=8);
    let n2 = rng.gen_range(2..=6);
    let n3 = rng.gen_range(2..=8);
    let a = random_matrix(rng, n1, n2, 0, u, 0.2);
    let b = random_matrix(rng, n2, n3, 0, u, 0.2);
    let mut c = random_matrix(rng, n1, n3, 0, 2 * u, 0.3);
    for _ in 0..plant {
        let i = rng.gen_range(0..n1);
        let k = rng.gen_range(0..n2);
        let j = rng.gen_range(0..n3);
        if let (Some(x), Some(y)) = (a.get(i, k), b.get(k, j)) {
            c.set(i, j, Some(x + y));
        }
    }
    TriangleInstance::new(a, b, c).unwrap()
}

/// Random triangle instance with a planted low-rank decomposition of C
/// (r ≤ min dims), plus planted exact triangles against that C.
fn random_low_rank_triangle(
    rng: &mut ChaCha8Rng,
    u: i64,
) -> (TriangleInstance, TargetedDecomposition) {
    let n1 = rng.gen_range(3..=8);
    let n2 = rng.gen_range(3..=6);
    let n3 = rng.gen_range(3..=8);
    let r = rng.gen_range(1..=n1.min(n2).min(n3));
    let u_fac: Vec<Vec<i64>> = (0..n1)
        .map(|_| (0..r).map(|_| rng.gen_range(0..=u)).collect())
        .collect();
    let v_fac: Vec<Vec<i64>> = (0..r)
        .map(|_| (0..n3).map(|_| rng.gen_range(0..=u)).collect())
        .collect();
    let mut s = MaskedMatrix::all_bot(n1, n3);
    let mut c = MaskedMatrix::all_bot(n1, n3);
    for i in 0..n1 {
        for j in 0..n3 {
            if rng.gen::<f64>() > 0.25 {
                let sel = rng.gen_range(0..r);
                s.set(i, j, Some(sel as i64 + 1));
                c.set(i, j, Some(u_fac[i][sel] + v_fac[sel][j]));
            }
        }
    }
    let a = random_matrix(rng, n1, n2, 0, u, 0.2);
    let mut b = random_matrix(rng, n2, n3, 0, u, 0.2);
    // Plant triangles consistent with C.
    for _ in 0..4 {
        let i = rng.gen_range(0..n1);
        let k = rng.gen_range(0..n2);
        let j = rng.gen_range(0..n3);
        if let (Some(x), Some(z)) = (a.get(i, k), c.get(i, j)) {
            if z - x >= 0 {
                b.set(k, j, Some(z - x));
            }
        }
    }
    let inst = TriangleInstance::new(a, b, c).unwrap();
    let decomp = RankDecomposition { r, u: u_fac, v: v_fac, s };
    (inst, TargetedDecomposition::of_c(decomp))
}

fn random_set(rng: &mut ChaCha8Rng, max_len: usize, lo: i64, hi: i64) -> IntegerSet {
    let len = rng.gen_range(1..=max_len);
    IntegerSet::new((0..len).map(|_| rng.gen_range(lo..=hi)).collect())
}

fn pass(criterion: &str) {
    println!("criterion {criterion}: PASS");
}

// ---------------------------------------------------------------------------
// Criterion 1: oracle equivalence for products
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_products_equal_brute() {
    // min_plus_small_universe, 1000 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..1000 {
        let (a, b) = random_product(&mut rng, 64);
        let u = a.max_entry().unwrap_or(0).max(b.max_entry().unwrap_or(0));
        assert_eq!(
            min_plus_small_universe(&a, &b, u).unwrap(),
            min_plus_brute(&a, &b).unwrap(),
            "small universe, instance {i}"
        );
    }

    // min_plus_via_exact_triangle, 1000 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let tri_solver = |inst: &TriangleInstance| Ok(exact_triangle_brute(inst));
    for i in 0..1000 {
        let (a, b) = random_product(&mut rng, 64);
        assert_eq!(
            min_plus_via_exact_triangle(&a, &b, &tri_solver).unwrap(),
            min_plus_brute(&a, &b).unwrap(),
            "scaling, instance {i}"
        );
    }

    // small_universe_reduction, 1000 instances (mostly small universes, a
    // slice of large ones; brute triangle solver) + 30 through the full
    // low-rank pipeline.
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let brute = |a: &MaskedMatrix, b: &MaskedMatrix| min_plus_brute(a, b);
    let brute_tri = |inst: &TriangleInstance, _td: &TargetedDecomposition| -> Result<_> {
        Ok(exact_triangle_brute(inst))
    };
    for i in 0..1000 {
        let u_max = if i % 50 == 0 { 64 } else { 16 };
        let (a, b) = random_product(&mut rng, u_max);
        let n2s = (a.cols() / 2).max(1);
        let (got, stats) =
            small_universe_reduction_with_stats(&a, &b, n2s, 2, &brute, &brute_tri, i as u64)
                .unwrap();
        assert_eq!(got, min_plus_brute(&a, &b).unwrap(), "small-universe reduction, instance {i}");
        // Recursion depth stays within ⌈log2 u⌉ + 1.
        let u = a.max_entry().unwrap_or(0).max(b.max_entry().unwrap_or(0)).max(1) as u64;
        let ceil_log2 = if u <= 1 { 0 } else { 64 - (u - 1).leading_zeros() };
        assert!(
            stats.recursion_depth <= ceil_log2 + 1,
            "recursion depth {} > {} for u = {u}, instance {i}",
            stats.recursion_depth,
            ceil_log2 + 1
        );
    }
    let knobs = Knobs::default();
    let lowrank_tri = |inst: &TriangleInstance, td: &TargetedDecomposition| {
        solve_low_rank(inst, td, &knobs)
    };
    for i in 0..30 {
        let (a, b) = random_product(&mut rng, 16);
        let n2s = (a.cols() / 2).max(1);
        let got =
            minplus::reductions::small_universe_reduction(&a, &b, n2s, 2, &brute, &lowrank_tri, i)
                .unwrap();
        assert_eq!(got, min_plus_brute(&a, &b).unwrap(), "sur via low-rank, instance {i}");
    }

    // doubling_reduction, 1000 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for i in 0..1000 {
        let u_max = if i % 100 == 0 { 64 } else { 12 };
        let n1 = rng.gen_range(2..=8);
        let n2 = rng.gen_range(2..=4).min(n1);
        let n3 = rng.gen_range(n1.max(2)..=8).max(n2);
        let u = rng.gen_range(1..=u_max);
        let a = random_matrix(&mut rng, n1, n2, 0, u, 0.2);
        let b = random_matrix(&mut rng, n2, n3, 0, u, 0.2);
        let k = if i % 3 == 0 { 2 } else { 4 };
        let got =
            minplus::reductions::doubling_reduction(&a, &b, k, &brute, i as u64, &knobs).unwrap();
        assert_eq!(got, min_plus_brute(&a, &b).unwrap(), "doubling reduction, instance {i}");
    }

    // hash_universe_compression on low-doubling entry sets, 1000 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let source = |x: &IntegerSet| sum_order_hash_search(x, 1 << 22);
    let mut solved = 0;
    let mut attempts = 0;
    while solved < 1000 {
        attempts += 1;
        assert!(attempts < 3000, "too many hash failures");
        let step = rng.gen_range(1..=13i64);
        let base = rng.gen_range(0..=30i64);
        let len = rng.gen_range(1..=5usize);
        let values: Vec<i64> = (0..len as i64).map(|i| base + i * step).collect();
        let n1 = rng.gen_range(2..=12);
        let n2 = rng.gen_range(2..=8);
        let n3 = rng.gen_range(2..=12);
        let pick = |rng: &mut ChaCha8Rng| values[rng.gen_range(0..values.len())];
        let mut a = MaskedMatrix::all_bot(n1, n2);
        let mut b = MaskedMatrix::all_bot(n2, n3);
        for i in 0..n1 {
            for k in 0..n2 {
                if rng.gen::<f64>() > 0.2 {
                    let v = pick(&mut rng);
                    a.set(i, k, Some(v));
                }
            }
        }
        for k in 0..n2 {
            for j in 0..n3 {
                if rng.gen::<f64>() > 0.2 {
                    let v = pick(&mut rng);
                    b.set(k, j, Some(v));
                }
            }
        }
        match hash_universe_compression(&a, &b, &source, &brute, solved as u64) {
            Ok(got) => {
                assert_eq!(got, min_plus_brute(&a, &b).unwrap(), "hash compression");
                solved += 1;
            }
            Err(minplus::Error::HashUnavailable(_)) => continue,
            Err(e) => panic!("unexpected error: {e}"),
        }
    }

    // §6 reduction decodings, 1000 instances each.
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for i in 0..1000 {
        let (a, b) = random_product(&mut rng, 16);
        let expect = min_plus_brute(&a, &b).unwrap();
        let red = reduce_minplus_to_min_product(&a, &b).unwrap();
        assert_eq!(
            red.decode(&min_product_brute(&red.a_prime, &red.b_prime).unwrap()),
            expect,
            "min product, instance {i}"
        );
        let red = reduce_minplus_to_min_equality(&a, &b).unwrap();
        assert_eq!(
            red.decode(&min_eq_brute(&red.a_prime, &red.b_prime).unwrap()),
            expect,
            "min equality, instance {i}"
        );
        let red = reduce_minplus_to_min_witness(&a, &b).unwrap();
        let (vals, wits) = red.decode(&min_witness_brute(&red.a_prime, &red.b_prime).unwrap());
        assert_eq!(vals, expect, "min witness, instance {i}");
        for (r, c, k) in wits.iter_present() {
            assert_eq!(
                a.get(r, k as usize).unwrap() + b.get(k as usize, c).unwrap(),
                expect.get(r, c).unwrap(),
                "min witness decode, instance {i}"
            );
        }
    }

    // Bounded-difference transform, 1000 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for i in 0..1000 {
        let n1 = rng.gen_range(2..=12);
        let n2 = rng.gen_range(2..=8);
        let n3 = rng.gen_range(2..=12);
        let c = rng.gen_range(0..=3i64);
        let mut a = MaskedMatrix::all_bot(n1, n2);
        for r in 0..n1 {
            let mut v = rng.gen_range(0..=32i64);
            for k in 0..n2 {
                a.set(r, k, Some(v));
                v = (v + rng.gen_range(-c..=c)).max(0);
            }
        }
        let b = random_matrix(&mut rng, n2, n3, 0, 64, 0.3);
        let tr = monotone_bd_transform(&a, &b, c).unwrap();
        assert!(tr.is_row_monotone() && tr.is_col_monotone_decreasing(), "bd shape {i}");
        assert!(tr.is_bounded_difference(), "bd constant {i}");
        let product = min_plus_brute(&tr.a, &tr.b).unwrap();
        assert_eq!(
            tr.reconstruct(&product),
            min_plus_brute(&a, &b).unwrap(),
            "bd transform, instance {i}"
        );
    }

    // Rank-substitution bounded-difference core, 1000 regular instances
    // (Latin-square fills over random distinct entry sets keep every value
    // at most once per row and column).
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let bd_solver = |a: &MaskedMatrix, b: &MaskedMatrix| min_plus_brute(a, b);
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    for i in 0..1000 {
        let n = rng.gen_range(3..=6);
        let mut vals: Vec<i64> = Vec::new();
        while vals.len() < n {
            let v = rng.gen_range(0..=20i64);
            if !vals.contains(&v) {
                vals.push(v);
            }
        }
        vals.sort_unstable();
        let units: Vec<usize> = (1..n).filter(|&m| gcd(m, n) == 1).collect();
        let mult_a = units[rng.gen_range(0..units.len())];
        let offset = rng.gen_range(0..n);
        let mut a = MaskedMatrix::all_bot(n, n);
        let mut b = MaskedMatrix::all_bot(n, n);
        for r in 0..n {
            for k in 0..n {
                a.set(r, k, Some(vals[(mult_a * r + k) % n]));
                if rng.gen::<f64>() > 0.3 {
                    b.set(r, k, Some(vals[(r + k + offset) % n]));
                }
            }
        }
        let l = [1i64, 2, 4][i % 3];
        let (got, stats) = rank_substitution_bd_reduction(&a, &b, l, &bd_solver, i as u64).unwrap();
        assert_eq!(got, min_plus_brute(&a, &b).unwrap(), "bd core, instance {i}");
        assert!(
            (stats.bad_pairs as i64) * l <= (stats.sumset_size * stats.entry_count) as i64,
            "bad-pair bound, instance {i}"
        );
    }

    pass("1 (oracle equivalence, products)");
}

// ---------------------------------------------------------------------------
// Criterion 2: oracle equivalence for triangles
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_triangles_equal_brute() {
    let knobs = Knobs::default();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    // 600 planted low-rank instances + 300 trivial-decomposition instances
    // + 100 extremes = 1000.
    for i in 0..600 {
        let (inst, td) = random_low_rank_triangle(&mut rng, 8);
        let flags = solve_low_rank(&inst, &td, &knobs).unwrap();
        assert_eq!(flags, exact_triangle_brute(&inst), "low-rank planted, instance {i}");
        assert_eq!(
            solve_uniform_low_doubling(&inst),
            exact_triangle_brute(&inst),
            "uld planted, instance {i}"
        );
    }
    for i in 0..300 {
        let inst = random_triangle(&mut rng, 8, 4);
        let decomp =
            minplus::rank::trivial_decomposition(&inst.c, minplus::rank::TrivialMode::Size)
                .unwrap();
        let flags = solve_low_rank(&inst, &TargetedDecomposition::of_c(decomp), &knobs).unwrap();
        assert_eq!(flags, exact_triangle_brute(&inst), "low-rank trivial, instance {i}");
        assert_eq!(
            solve_uniform_low_doubling(&inst),
            exact_triangle_brute(&inst),
            "uld trivial, instance {i}"
        );
    }
    // Extremes: all-exact (C = A * B) and no-triangle instances.
    for i in 0..50 {
        let a = random_matrix(&mut rng, 5, 4, 0, 6, 0.1);
        let b = random_matrix(&mut rng, 4, 5, 0, 6, 0.1);
        let c = min_plus_brute(&a, &b).unwrap();
        let inst = TriangleInstance::new(a, b, c).unwrap();
        let decomp =
            minplus::rank::trivial_decomposition(&inst.c, minplus::rank::TrivialMode::Size)
                .unwrap();
        let flags = solve_low_rank(&inst, &TargetedDecomposition::of_c(decomp), &knobs).unwrap();
        assert_eq!(flags, exact_triangle_brute(&inst), "all-exact, instance {i}");
        assert_eq!(solve_uniform_low_doubling(&inst), exact_triangle_brute(&inst));
    }
    for i in 0..50 {
        let mut inst = random_triangle(&mut rng, 4, 0);
        inst.c = MaskedMatrix::all_bot(inst.n1(), inst.n3());
        let decomp = RankDecomposition::empty(inst.n1(), inst.n3());
        let flags = solve_low_rank(&inst, &TargetedDecomposition::of_c(decomp), &knobs).unwrap();
        assert!(!flags.c.any(), "no-triangle, instance {i}");
        assert_eq!(solve_uniform_low_doubling(&inst), exact_triangle_brute(&inst));
    }
    pass("2 (oracle equivalence, triangles)");
}

// ---------------------------------------------------------------------------
// Criterion 3: reduction soundness + honest tags
// ---------------------------------------------------------------------------

fn check_output_sound(
    inst: &TriangleInstance,
    out: &minplus::triangle::ReductionOutput,
    what: &str,
) -> (usize, usize) {
    assert!(verify_reduction_output(inst, out), "{what}: covering violated");
    let mut tag_count = 0;
    for ri in &out.instances {
        assert!(
            verify_potential_adjustment(inst, &ri.adjustment),
            "{what}: adjustment violated"
        );
        for tag in &ri.tags {
            assert!(recount_tag(&ri.adjustment.instance, tag), "{what}: tag {tag} dishonest");
            tag_count += 1;
        }
    }
    (out.instances.len(), tag_count)
}

#[test]
fn criterion_03_reduction_soundness() {
    let knobs = Knobs::default();
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let mut emitted = [0usize; 4];

    // 350 planted-low-rank + random instances through the three low-rank
    // entry points.
    for i in 0..350 {
        let (inst, td) = random_low_rank_triangle(&mut rng, 6);
        let t = 1 + (i % 3) as u64;
        let out = reduce_low_rank_to_slice_uniform(&inst, &td, t).unwrap();
        emitted[0] += check_output_sound(&inst, &out, "slice-uniform").0;

        let out = reduce_low_rank_to_uniform_regular(&inst, &td, &knobs).unwrap();
        emitted[1] += check_output_sound(&inst, &out, "uniform-regular").0;

        let out = reduce_low_rank_to_low_doubling(&inst, &td, knobs.k, &knobs).unwrap();
        emitted[2] += check_output_sound(&inst, &out, "low-doubling").0;
    }

    // 100 slice-uniform instances through the uniformization step.
    for i in 0..100 {
        let n1 = rng.gen_range(2..=6);
        let n2 = rng.gen_range(2..=6);
        let n3 = rng.gen_range(2..=6);
        let mut a = MaskedMatrix::all_bot(n1, n2);
        for r in 0..n1 {
            let pool: Vec<i64> = (0..2).map(|_| rng.gen_range(0..8)).collect();
            for k in 0..n2 {
                if rng.gen::<f64>() > 0.2 {
                    a.set(r, k, Some(pool[rng.gen_range(0..pool.len())]));
                }
            }
        }
        let b = random_matrix(&mut rng, n2, n3, 0, 8, 0.2);
        let mut c = random_matrix(&mut rng, n1, n3, 0, 16, 0.3);
        for _ in 0..3 {
            let (i1, k1, j1) =
                (rng.gen_range(0..n1), rng.gen_range(0..n2), rng.gen_range(0..n3));
            if let (Some(x), Some(y)) = (a.get(i1, k1), b.get(k1, j1)) {
                c.set(i1, j1, Some(x + y));
            }
        }
        let inst = TriangleInstance::new(a, b, c).unwrap();
        let d = 2;
        let out = reduce_slice_uniform_to_uniform(&inst, d, &knobs).unwrap();
        let (n_emitted, _) = check_output_sound(&inst, &out, "slice-to-uniform");
        emitted[3] += n_emitted;
        let _ = i;
    }

    // 50 uniform regular (Latin-square) instances through the BSG step.
    // Multipliers are units mod n so rows and columns stay permutations.
    for i in 0..50 {
        let n = 4 + 2 * (i % 3);
        let latin = |mult: usize, mask_rate: f64, rng: &mut ChaCha8Rng| {
            let mut m = MaskedMatrix::all_bot(n, n);
            for r in 0..n {
                for k in 0..n {
                    if rng.gen::<f64>() >= mask_rate {
                        m.set(r, k, Some(((mult * r + k) % n) as i64));
                    }
                }
            }
            m
        };
        let a = latin(1, 0.1, &mut rng);
        let b = latin(5, 0.1, &mut rng);
        let c = latin(7 % n.max(1), 0.1, &mut rng);
        let Ok(inst) = TriangleInstance::new(a, b, c) else { continue };
        let d = inst.joint_entries().len();
        let out = reduce_uniform_regular_to_low_doubling(&inst, d, knobs.k, &knobs).unwrap();
        check_output_sound(&inst, &out, "uniform-regular-to-low-doubling");
    }

    // The corpus must actually exercise instance emission.
    assert!(emitted.iter().all(|&e| e > 0), "corpus emitted no instances: {emitted:?}");
    pass("3 (reduction soundness and honest tags)");
}

// ---------------------------------------------------------------------------
// Criterion 4: regular rank decomposition
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_regular_rank_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    for round in 0..500 {
        let n = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=64);
        let r = rng.gen_range(1..=16);
        let u_fac: Vec<Vec<i64>> = (0..n)
            .map(|_| (0..r).map(|_| rng.gen_range(-20..20)).collect())
            .collect();
        let v_fac: Vec<Vec<i64>> = (0..r)
            .map(|_| (0..m).map(|_| rng.gen_range(-20..20)).collect())
            .collect();
        let mut s = MaskedMatrix::all_bot(n, m);
        let mut a = MaskedMatrix::all_bot(n, m);
        for i in 0..n {
            for j in 0..m {
                if rng.gen::<f64>() > 0.2 {
                    // Skewed selector distribution to stress the counts.
                    let sel = if rng.gen::<f64>() < 0.5 { 0 } else { rng.gen_range(0..r) };
                    s.set(i, j, Some(sel as i64 + 1));
                    a.set(i, j, Some(u_fac[i][sel] + v_fac[sel][j]));
                }
            }
        }
        let d = RankDecomposition { r, u: u_fac, v: v_fac, s };
        assert!(verify_decomposition(&a, &d).unwrap());
        let reg = minplus::rank::regularize_decomposition(&a, &d).unwrap();
        assert!(
            is_partition(&a, &[&reg.row.matrix, &reg.col.matrix, &reg.small.matrix]),
            "round {round}: partition"
        );
        assert!(verify_decomposition(&reg.row.matrix, &reg.row.decomp).unwrap());
        assert!(verify_decomposition(&reg.col.matrix, &reg.col.decomp).unwrap());
        assert!(verify_decomposition(&reg.small.matrix, &reg.small.decomp).unwrap());
        let row_report = RegularityReport::new(&reg.row.decomp);
        assert!(row_report.is_row_regular(reg.big_r, m), "round {round}: row regularity");
        let col_report = RegularityReport::new(&reg.col.decomp);
        assert!(col_report.is_col_regular(reg.big_r, n), "round {round}: col regularity");
        assert!(reg.small.decomp.r <= r.div_ceil(2), "round {round}: rank halving");
    }
    pass("4 (regular rank decomposition)");
}

// ---------------------------------------------------------------------------
// Criterion 5: conflict-free covering
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_conflict_free_covering() {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    for round in 0..500 {
        let n = if round % 25 == 0 {
            rng.gen_range(1000..=4096)
        } else {
            rng.gen_range(1..=400)
        };
        let r = rng.gen_range(2..=128);
        let s_cap = rng.gen_range(1..=32usize).min(r - 1);
        let mut items = Vec::with_capacity(n);
        let mut conflicts = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.gen_range(1..=r);
            let k = rng.gen_range(0..=s_cap);
            let mut c: Vec<usize> =
                (0..k).map(|_| rng.gen_range(1..=r)).filter(|&y| y != x).collect();
            c.sort_unstable();
            c.dedup();
            items.push(x);
            conflicts.push(c);
        }
        let inst = CoverInstance::new(r, items, conflicts).unwrap();
        let cover = conflict_free_cover(&inst).unwrap();
        assert!(verify_cover(&inst, &cover), "round {round}: coverage");
        assert!(
            cover.sets.len() <= Cover::size_bound(inst.len(), inst.s),
            "round {round}: size bound ({} > {})",
            cover.sets.len(),
            Cover::size_bound(inst.len(), inst.s)
        );
        // Determinism: three runs, byte-identical serialized output.
        let bytes = serde_json::to_vec(&cover).unwrap();
        for _ in 0..2 {
            let again = conflict_free_cover(&inst).unwrap();
            assert_eq!(serde_json::to_vec(&again).unwrap(), bytes, "round {round}: determinism");
        }
    }
    pass("5 (conflict-free covering)");
}

// ---------------------------------------------------------------------------
// Criterion 6: greedy covering
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_greedy_covering() {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    for round in 0..500 {
        // |X| ≥ 2: the ⌈·⌉ bound degenerates to 0 for singletons.
        let x = {
            let mut s = random_set(&mut rng, 256, -300, 300);
            while s.len() < 2 {
                s = random_set(&mut rng, 256, -300, 300);
            }
            s
        };
        let y = random_set(&mut rng, 256, -300, 300);
        let shifts = greedy_cover(&x, &y).unwrap();
        for e in x.iter() {
            assert!(
                shifts.iter().any(|s| y.contains(e - s)),
                "round {round}: {e} uncovered"
            );
        }
        assert!(
            shifts.len() <= greedy_cover_bound(&x, &y),
            "round {round}: size bound ({} > {})",
            shifts.len(),
            greedy_cover_bound(&x, &y)
        );
    }
    pass("6 (greedy covering)");
}

// ---------------------------------------------------------------------------
// Criterion 7: popular sum decomposition
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_popular_sum_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    for round in 0..200 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=6u64);
        let p = rng.gen_range(1..=3u64);
        let lo = -10;
        let hi = 10;
        let xs: Vec<IntegerSet> =
            (0..n).map(|_| random_set(&mut rng, d as usize, lo, hi)).collect();
        let ys: Vec<IntegerSet> =
            (0..m).map(|_| random_set(&mut rng, d as usize, lo, hi)).collect();
        let dec = popular_sum_decomposition(&xs, &ys, d, p).unwrap();
        // Termination within p² iterations per side.
        assert!(dec.x_sets.len() as u64 <= p * p, "round {round}: X iterations");
        assert!(dec.y_sets.len() as u64 <= p * p, "round {round}: Y iterations");
        // Both decomposition properties re-verified exactly from scratch.
        assert!(dec.verify(&xs, &ys).unwrap(), "round {round}: properties");
    }
    pass("7 (popular sum decomposition)");
}

// ---------------------------------------------------------------------------
// Criterion 8: witness listing
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_witness_listing() {
    let t = 2usize;
    let rep_c = 8.0;
    let mut complete = 0;
    let mut runs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(801);

    // Exact-triangle variant: 100 runs.
    let tri_solver = |inst: &TriangleInstance| Ok(exact_triangle_brute(inst));
    while runs < 100 {
        let inst = random_triangle(&mut rng, 40, 3);
        let census = witness_census(&inst);
        let within = census.a.iter().flatten().all(|l| l.len() <= t)
            && census.b.iter().flatten().all(|l| l.len() <= t)
            && census.c.iter().flatten().all(|l| l.len() <= t);
        if !within {
            continue;
        }
        runs += 1;
        let lists =
            list_witnesses_exact_triangle(&inst, t, &tri_solver, 800 + runs as u64, rep_c)
                .unwrap();
        // Validity: reported witnesses are always true witnesses.
        for (got, want) in [(&lists.a, &census.a), (&lists.b, &census.b), (&lists.c, &census.c)] {
            for (lg, lw) in got.iter().flatten().zip(want.iter().flatten()) {
                assert!(lg.iter().all(|w| lw.contains(w)), "invalid witness reported");
            }
        }
        if lists.a == census.a && lists.b == census.b && lists.c == census.c {
            complete += 1;
        }
    }

    // Min-plus variant: 100 runs.
    let mp_solver = |a: &MaskedMatrix, b: &MaskedMatrix| min_plus_brute(a, b);
    let mut mp_runs = 0;
    while mp_runs < 100 {
        let (a, b) = random_product(&mut rng, 40);
        let census = min_plus_witnesses_brute(&a, &b).unwrap();
        if census.iter().flatten().any(|l| l.len() > t) {
            continue;
        }
        mp_runs += 1;
        runs += 1;
        let lists =
            list_witnesses_min_plus(&a, &b, t, &mp_solver, 900 + mp_runs as u64, rep_c).unwrap();
        for (lg, lw) in lists.iter().flatten().zip(census.iter().flatten()) {
            assert!(lg.iter().all(|w| lw.contains(w)), "invalid min-plus witness");
        }
        if lists == census {
            complete += 1;
        }
    }

    assert!(runs >= 200, "need at least 200 runs, got {runs}");
    assert!(
        complete * 100 >= runs * 99,
        "complete recovery in {complete}/{runs} runs, below 99%"
    );
    pass("8 (witness listing)");
}

// ---------------------------------------------------------------------------
// Criterion 9: additive-combinatorics inequalities
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_additive_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(901);

    // Plünnecke–Ruzsa with X = Y: |nX − mX| ≤ K^{n+m} |X| for n, m ≤ 3.
    for _ in 0..300 {
        let x = random_set(&mut rng, 12, -25, 25);
        let k = doubling_constant(&x).unwrap();
        for n in 0..=3u32 {
            for m in 0..=3u32 {
                if n + m == 0 {
                    continue;
                }
                let npart = iterated_sumset(&x, n);
                let mpart = iterated_sumset(&x, m);
                let diff = difference_set(&npart, &mpart);
                // |diff| ≤ K^{n+m} |X| with K = num/den, exact in u128.
                let lhs = (diff.len() as u128) * (*k.denom() as u128).pow(n + m);
                let rhs = (*k.numer() as u128).pow(n + m) * (x.len() as u128);
                assert!(lhs <= rhs, "Plünnecke–Ruzsa violated: X={:?} n={n} m={m}", x.as_slice());
            }
        }
    }

    // Ruzsa triangle inequality on random triples.
    for _ in 0..500 {
        let x = random_set(&mut rng, 12, -30, 30);
        let y = random_set(&mut rng, 12, -30, 30);
        let z = random_set(&mut rng, 12, -30, 30);
        let lhs = sumset(&x, &y).len() * z.len();
        let rhs = sumset(&x, &z).len() * sumset(&y, &z).len();
        assert!(lhs <= rhs, "Ruzsa triangle violated");
    }

    // Sumset doubling: |Z+Z| ≤ K⁸|Z| for Z = X + Y when both sets have
    // doubling ≤ K.
    for _ in 0..500 {
        let x = random_set(&mut rng, 10, -20, 20);
        let y = random_set(&mut rng, 10, -20, 20);
        let kx = doubling_constant(&x).unwrap();
        let ky = doubling_constant(&y).unwrap();
        let k = kx.max(ky);
        let z = sumset(&x, &y);
        let zz = sumset(&z, &z);
        let lhs = (zz.len() as u128) * (*k.denom() as u128).pow(8);
        let rhs = (*k.numer() as u128).pow(8) * (z.len() as u128);
        assert!(lhs <= rhs, "sumset doubling violated");
    }

    // Exhaustive small corpus: all subsets of {0..7} of size ≥ 1.
    for mask in 1u32..256 {
        let x = IntegerSet::new((0..8).filter(|i| mask >> i & 1 == 1).collect());
        let k = doubling_constant(&x).unwrap();
        let two = iterated_sumset(&x, 2);
        let diff = difference_set(&two, &x); // |2X − X| ≤ K³|X|
        let lhs = (diff.len() as u128) * (*k.denom() as u128).pow(3);
        let rhs = (*k.numer() as u128).pow(3) * (x.len() as u128);
        assert!(lhs <= rhs, "exhaustive Plünnecke–Ruzsa violated for mask {mask}");
    }
    pass("9 (additive-combinatorics inequalities)");
}

// ---------------------------------------------------------------------------
// Criterion 10: sum-order-preserving hashing, exhaustive
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_hash_search_exhaustive() {
    let start = std::time::Instant::now();
    // Every X ⊆ {0..12} with 1 ≤ |X| ≤ 5.
    let mut checked = 0u32;
    for mask in 1u32..(1 << 13) {
        if mask.count_ones() > 5 {
            continue;
        }
        let x = IntegerSet::new((0..13).filter(|i| mask >> i & 1 == 1).collect());
        let range = x.len() as i64;
        let oracle = hash_exists_oracle(&x, range);
        let outcome = sum_order_hash_search(&x, 1 << 26);
        match outcome {
            HashSearchOutcome::Found { hash, full, .. } => {
                assert!(verify_sum_order_preserving(&hash), "invalid hash for {:?}", x.as_slice());
                assert_eq!(
                    full, oracle,
                    "search/oracle disagree on {:?} (full-domain)",
                    x.as_slice()
                );
            }
            HashSearchOutcome::Budget => panic!("budget exhausted on {:?}", x.as_slice()),
            HashSearchOutcome::NoneExists => {
                panic!("nonempty sets always admit a singleton hash")
            }
        }
        checked += 1;
    }
    assert_eq!(checked, 2379, "subset count");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "hash enumeration took {elapsed:?}");
    pass("10 (sum-order-preserving hashing)");
}

// ---------------------------------------------------------------------------
// Criterion 11: graph gadgets
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_gadgets() {
    let mut rng = ChaCha8Rng::seed_from_u64(1101);

    // Node-weighted gadget, 200 instances.
    for round in 0..200 {
        let n1 = rng.gen_range(2..=9);
        let n2 = rng.gen_range(2..=4);
        let n3 = rng.gen_range(2..=9);
        let n_vals = rng.gen_range(1..=n2);
        let values: Vec<i64> = {
            let mut v: Vec<i64> = (0..n_vals).map(|_| rng.gen_range(1..=9)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let pick =
            |rng: &mut ChaCha8Rng| values[rng.gen_range(0..values.len())];
        let mut a = MaskedMatrix::all_bot(n1, n2);
        let mut b = MaskedMatrix::all_bot(n2, n3);
        for i in 0..n1 {
            for k in 0..n2 {
                if rng.gen::<f64>() > 0.25 {
                    let v = pick(&mut rng);
                    a.set(i, k, Some(v));
                }
            }
        }
        for k in 0..n2 {
            for j in 0..n3 {
                if rng.gen::<f64>() > 0.25 {
                    let v = pick(&mut rng);
                    b.set(k, j, Some(v));
                }
            }
        }
        let (g, dec) = node_weighted_gadget(&a, &b).unwrap();
        let x_count = {
            let mut e = a.distinct_entries();
            e.extend(b.distinct_entries());
            IntegerSet::new(e).len()
        };
        assert_eq!(g.n, n1 + n3 + 2 * n2 * x_count, "round {round}: vertex count");
        assert!(
            g.n <= 4 * n1.max(n3).max(n2 * n2),
            "round {round}: vertex bound (n = {})",
            g.n
        );
        assert_eq!(
            dec.decode(&g).unwrap(),
            min_plus_brute(&a, &b).unwrap(),
            "round {round}: node-weighted decode"
        );
    }

    // Directed layered gadget, 200 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(1102);
    for round in 0..200 {
        let n1 = rng.gen_range(2..=8);
        let n2 = rng.gen_range(2..=n1);
        let n3 = rng.gen_range(n1..=8);
        let n = n1.max(n3);
        let u = rng.gen_range(0..=n as i64);
        let a = random_matrix(&mut rng, n1, n2, 0, u.max(0), 0.25);
        let b = random_matrix(&mut rng, n2, n3, 0, u.max(0), 0.25);
        let (g, dec) = min_plus_to_apsp_graph(&a, &b, ApspGadgetVariant::DirectedLayered).unwrap();
        assert!(g.n <= 2 * n + 4 * n + 5 * n2, "round {round}: O(n) vertex bound");
        assert_eq!(
            dec.decode(&g).unwrap(),
            min_plus_brute(&a, &b).unwrap(),
            "round {round}: directed decode"
        );
    }

    // Undirected 3-layer gadget, 200 instances.
    let mut rng = ChaCha8Rng::seed_from_u64(1103);
    for round in 0..200 {
        let n1 = rng.gen_range(2..=10);
        let n2 = rng.gen_range(2..=8);
        let n3 = rng.gen_range(2..=10);
        let u = rng.gen_range(1..=24);
        let a = random_matrix(&mut rng, n1, n2, 0, u - 1, 0.3);
        let b = random_matrix(&mut rng, n2, n3, 0, u - 1, 0.3);
        let (g, dec) =
            min_plus_to_apsp_graph(&a, &b, ApspGadgetVariant::Undirected3Layer).unwrap();
        assert_eq!(g.n, n1 + n2 + n3, "round {round}: 3-layer vertex count");
        assert_eq!(
            dec.decode(&g).unwrap(),
            min_plus_brute(&a, &b).unwrap(),
            "round {round}: undirected decode"
        );
    }

    // Graph JSON wire format round-trips.
    let mut g = WeightedGraph::new(3, false);
    g.add_edge(0, 1, 5);
    g.node_weights = Some(vec![1, 2, 3]);
    let text = serde_json::to_string(&g).unwrap();
    let back: WeightedGraph = serde_json::from_str(&text).unwrap();
    assert_eq!(back.n, 3);
    assert_eq!(back.edges, vec![(0, 1, 5)]);
    pass("11 (graph gadgets)");
}
