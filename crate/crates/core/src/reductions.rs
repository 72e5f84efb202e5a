//! Min-plus-side reductions: witness listing, the small-universe reduction,
//! the doubling reduction, and hash-based universe compression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::addcomb::{greedy_cover, HashSearchOutcome, IntegerSet, SumOrderHash};
use crate::error::{Error, Result};
use crate::matrix::{entry_min, min_plus_brute, MaskedMatrix, TriangleInstance};
use crate::rank::RankDecomposition;
use crate::triangle::{
    reduce_low_rank_to_low_doubling, Knobs, TargetedDecomposition,
};

/// A min-plus product solver, used as the target of reductions. It must be
/// exact on any restriction of its inputs.
pub type MinPlusSolver<'a> = dyn Fn(&MaskedMatrix, &MaskedMatrix) -> Result<MaskedMatrix> + 'a;

/// A solver for low-rank exact-triangle instances.
pub type LowRankTriangleSolver<'a> =
    dyn Fn(&TriangleInstance, &TargetedDecomposition) -> Result<crate::matrix::EdgeFlags> + 'a;

// ---------------------------------------------------------------------------
// Witness listing for min-plus products
// ---------------------------------------------------------------------------

/// Listing-to-decision reduction for min-plus products: random restrictions
/// of the inner dimension at every dyadic rate plus bit-probing recover up
/// to `t` verified witnesses per output cell. Deterministic given the seed.
pub fn list_witnesses_min_plus(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    t: usize,
    solver: &MinPlusSolver,
    seed: u64,
    rep_c: f64,
) -> Result<Vec<Vec<Vec<usize>>>> {
    if a.cols() != b.rows() {
        return Err(Error::shape("witness listing: inner dimensions disagree"));
    }
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());
    let c_full = solver(a, b)?;
    let mut lists: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n3]; n1];
    if n2 == 0 {
        return Ok(lists);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps = ((rep_c * ((n1 * n3) as f64 + 1.0).ln()).ceil() as usize).max(1) * t.max(1);
    let bits = usize::BITS - (n2 - 1).max(1).leading_zeros();
    let levels = (n2 as u64).ilog2() as usize + 1;

    for _ in 0..reps {
        for level in 0..=levels {
            let keep: Vec<bool> = (0..n2)
                .map(|_| level == 0 || rng.gen_range(0..(1usize << level)) == 0)
                .collect();
            if keep.iter().all(|k| !k) {
                continue;
            }
            let a_base = a.filter(|_, k, _| keep[k]);
            let c_base = solver(&a_base, b)?;
            let mut probes = Vec::with_capacity(bits as usize);
            for bit in 0..bits {
                let a_bit = a.filter(|_, k, _| keep[k] && (k >> bit) & 1 == 1);
                if a_bit.is_all_bot() {
                    probes.push(None);
                } else {
                    probes.push(Some(solver(&a_bit, b)?));
                }
            }
            for i in 0..n1 {
                for j in 0..n3 {
                    let Some(target) = c_full.get(i, j) else { continue };
                    if c_base.get(i, j) != Some(target) {
                        continue;
                    }
                    let mut candidate = 0usize;
                    for (bit, probe) in probes.iter().enumerate() {
                        if let Some(c_bit) = probe {
                            if c_bit.get(i, j) == Some(target) {
                                candidate |= 1 << bit;
                            }
                        }
                    }
                    if candidate < n2
                        && keep[candidate]
                        && crate::matrix::entry_add(a.get(i, candidate), b.get(candidate, j))
                            == Some(target)
                    {
                        let list = &mut lists[i][j];
                        if list.len() < t && !list.contains(&candidate) {
                            list.push(candidate);
                        }
                    }
                }
            }
        }
    }
    for row in &mut lists {
        for list in row {
            list.sort_unstable();
        }
    }
    Ok(lists)
}

// ---------------------------------------------------------------------------
// Pseudo-witness profiles
// ---------------------------------------------------------------------------

/// Which pseudo-witness notion a profile was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PseudoWitnessKind {
    /// `k` is a pseudo-witness if it witnesses the product of the rounded
    /// matrices `⌊A/q⌋, ⌊B/q⌋`.
    RoundedBase,
    /// `k` is a `q`-pseudo-witness if `A[i,k] + B[k,j] < (A*B)[i,j] + q`.
    AdditiveSlack,
}

/// Per-cell counts of pseudo-witnesses at the requested thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoWitnessProfile {
    pub kind: PseudoWitnessKind,
    pub thresholds: Vec<i64>,
    /// `counts[ti][i][j]` = number of pseudo-witnesses of `(i, j)` at
    /// threshold `thresholds[ti]`.
    pub counts: Vec<Vec<Vec<u32>>>,
}

/// Computes the additive-slack profile for thresholds `qs` (each ≥ 1).
pub fn pseudo_witness_profile_slack(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    qs: &[i64],
) -> Result<PseudoWitnessProfile> {
    if qs.iter().any(|&q| q < 1) {
        return Err(Error::domain("slack thresholds must be ≥ 1"));
    }
    let product = min_plus_brute(a, b)?;
    let mut counts = Vec::with_capacity(qs.len());
    for &q in qs {
        let mut grid = vec![vec![0u32; b.cols()]; a.rows()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let Some(base) = product.get(i, j) else { continue };
                for k in 0..a.cols() {
                    if let (Some(x), Some(y)) = (a.get(i, k), b.get(k, j)) {
                        if x + y < base + q {
                            grid[i][j] += 1;
                        }
                    }
                }
            }
        }
        counts.push(grid);
    }
    Ok(PseudoWitnessProfile {
        kind: PseudoWitnessKind::AdditiveSlack,
        thresholds: qs.to_vec(),
        counts,
    })
}

/// Computes the rounded-base profile for moduli `qs` (each ≥ 1): counts of
/// witnesses of `⌊A/q⌋ * ⌊B/q⌋`.
pub fn pseudo_witness_profile_rounded(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    qs: &[i64],
) -> Result<PseudoWitnessProfile> {
    if qs.iter().any(|&q| q < 1) {
        return Err(Error::domain("rounding moduli must be ≥ 1"));
    }
    let mut counts = Vec::with_capacity(qs.len());
    for &q in qs {
        let a1 = a.map_present(|v| v.div_euclid(q));
        let b1 = b.map_present(|v| v.div_euclid(q));
        let product = min_plus_brute(&a1, &b1)?;
        let mut grid = vec![vec![0u32; b.cols()]; a.rows()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let Some(base) = product.get(i, j) else { continue };
                for k in 0..a.cols() {
                    if let (Some(x), Some(y)) = (a1.get(i, k), b1.get(k, j)) {
                        if x + y == base {
                            grid[i][j] += 1;
                        }
                    }
                }
            }
        }
        counts.push(grid);
    }
    Ok(PseudoWitnessProfile {
        kind: PseudoWitnessKind::RoundedBase,
        thresholds: qs.to_vec(),
        counts,
    })
}

// ---------------------------------------------------------------------------
// Small-universe reduction
// ---------------------------------------------------------------------------

/// Statistics reported by [`small_universe_reduction_with_stats`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SmallUniverseStats {
    pub recursion_depth: u32,
}

/// Reduces a `{0..u}`-universe min-plus product to products over the universe
/// `{0..n2'}` (solved by `small_solver`) plus low-rank exact-triangle
/// instances (solved by `triangle_solver`), exactly as in the base-(p, q)
/// scheme: a recursive additive-error-2 approximation, residue splitting
/// into four sub-products, a sampling loop for unpopular pairs, and a
/// rank-(r1·q) decomposition for popular pairs.
pub fn small_universe_reduction(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    n2_small: usize,
    t: u64,
    small_solver: &MinPlusSolver,
    triangle_solver: &LowRankTriangleSolver,
    seed: u64,
) -> Result<MaskedMatrix> {
    Ok(small_universe_reduction_with_stats(a, b, n2_small, t, small_solver, triangle_solver, seed)?.0)
}

pub fn small_universe_reduction_with_stats(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    n2_small: usize,
    t: u64,
    small_solver: &MinPlusSolver,
    triangle_solver: &LowRankTriangleSolver,
    seed: u64,
) -> Result<(MaskedMatrix, SmallUniverseStats)> {
    if a.cols() != b.rows() {
        return Err(Error::shape("small-universe reduction: inner dimensions disagree"));
    }
    if n2_small < 1 || n2_small > a.cols() {
        return Err(Error::domain("need 1 ≤ n2' ≤ n2"));
    }
    if t < 1 {
        return Err(Error::domain("parameter t must be ≥ 1"));
    }
    a.check_universe(0, i64::MAX)?;
    b.check_universe(0, i64::MAX)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SmallUniverseStats::default();
    let c = sur_solve(a, b, n2_small, t, small_solver, triangle_solver, &mut rng, 0, &mut stats)?;
    Ok((c, stats))
}

#[allow(clippy::too_many_arguments)]
fn sur_solve(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    n2s: usize,
    t: u64,
    small_solver: &MinPlusSolver,
    triangle_solver: &LowRankTriangleSolver,
    rng: &mut ChaCha8Rng,
    depth: u32,
    stats: &mut SmallUniverseStats,
) -> Result<MaskedMatrix> {
    stats.recursion_depth = stats.recursion_depth.max(depth);
    let (n1, n3) = (a.rows(), b.cols());
    let u = a
        .max_entry()
        .into_iter()
        .chain(b.max_entry())
        .max()
        .unwrap_or(0);
    if a.is_all_bot() || b.is_all_bot() {
        return Ok(MaskedMatrix::all_bot(n1, n3));
    }
    if u <= n2s as i64 {
        return small_solver(a, b);
    }
    let q = (u + n2s as i64 - 1) / n2s as i64; // ⌈u / n2'⌉ ≥ 2
    let qh = (q + 1) / 2; // ⌈q/2⌉

    // Residue splitting: both matrices partitioned so that all entries have
    // (entry mod q) < ⌈q/2⌉; the high parts are shifted down by ⌈q/2⌉.
    let a_lo = a.filter(|_, _, v| v.rem_euclid(q) < qh);
    let a_hi = a.filter(|_, _, v| v.rem_euclid(q) >= qh).map_present(|v| v - qh);
    let b_lo = b.filter(|_, _, v| v.rem_euclid(q) < qh);
    let b_hi = b.filter(|_, _, v| v.rem_euclid(q) >= qh).map_present(|v| v - qh);

    let mut result = MaskedMatrix::all_bot(n1, n3);
    for (ax, off_a) in [(&a_lo, 0), (&a_hi, qh)] {
        if ax.is_all_bot() {
            continue;
        }
        for (by, off_b) in [(&b_lo, 0), (&b_hi, qh)] {
            if by.is_all_bot() {
                continue;
            }
            let part = sur_core(
                ax,
                by,
                q,
                n2s,
                t,
                small_solver,
                triangle_solver,
                rng,
                depth,
                stats,
            )?;
            let offset = off_a + off_b;
            for (i, j, v) in part.iter_present() {
                result.set(i, j, entry_min(result.get(i, j), Some(v + offset)));
            }
        }
    }
    Ok(result)
}

/// Core of the small-universe reduction, assuming `(entry mod q) < q/2` for
/// all entries of both matrices.
#[allow(clippy::too_many_arguments)]
fn sur_core(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    q: i64,
    n2s: usize,
    t: u64,
    small_solver: &MinPlusSolver,
    triangle_solver: &LowRankTriangleSolver,
    rng: &mut ChaCha8Rng,
    depth: u32,
    stats: &mut SmallUniverseStats,
) -> Result<MaskedMatrix> {
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());

    // Additive-error-2 approximation by recursion on halved entries.
    let t_approx = sur_solve(
        &a.map_present(|v| v / 2),
        &b.map_present(|v| v / 2),
        n2s,
        t,
        small_solver,
        triangle_solver,
        rng,
        depth + 1,
        stats,
    )?
    .map_present(|v| 2 * v);

    // Base-(p, q) representation.
    let a1 = a.map_present(|v| v / q);
    let b1 = b.map_present(|v| v / q);

    let mut c = MaskedMatrix::all_bot(n1, n3);
    let ln_out = ((n1 * n3) as f64 + 1.0).ln();

    // Unpopular pairs: sample a small set of inner indices; whenever the only
    // surviving pseudo-witness of a pair is a proper witness, the witness
    // scan is forced to report it.
    {
        let rate = (n2s as f64) / (2.0 * t as f64 * n2 as f64);
        let reps = ((4.0 * t as f64 * n2 as f64 / n2s as f64 * ln_out).ceil() as usize).max(1);
        for _ in 0..reps {
            let keep: Vec<bool> = (0..n2).map(|_| rng.gen::<f64>() < rate).collect();
            if keep.iter().all(|k| !k) {
                continue;
            }
            let a1_k = a1.filter(|_, k, _| keep[k]);
            if a1_k.is_all_bot() {
                continue;
            }
            let c_small = small_solver(&a1_k, &b1)?;
            for i in 0..n1 {
                for j in 0..n3 {
                    let Some(target) = c_small.get(i, j) else { continue };
                    for k in 0..n2 {
                        if !keep[k] {
                            continue;
                        }
                        if let (Some(x), Some(y)) = (a1.get(i, k), b1.get(k, j)) {
                            if x + y == target {
                                let full = a.get(i, k).unwrap() + b.get(k, j).unwrap();
                                c.set(i, j, entry_min(c.get(i, j), Some(full)));
                                break;
                            }
                        }
                    }
                }
            }
        }
    }

    // Popular pairs: a sampled restriction yields R1 = (A1 * B1) on all
    // popular pairs; the candidate matrix R (three offsets z) then gets a
    // rank-(r1·q) decomposition and is fed to the low-rank triangle solver.
    {
        let rate = (4.0 * (n2s as f64) / (t as f64 * n2 as f64) * ln_out).min(1.0);
        let sample: Vec<usize> = (0..n2).filter(|_| rng.gen::<f64>() < rate).collect();
        if !sample.is_empty() {
            let in_sample: Vec<bool> = {
                let mut v = vec![false; n2];
                for &k in &sample {
                    v[k] = true;
                }
                v
            };
            let a1_k = a1.filter(|_, k, _| in_sample[k]);
            if !a1_k.is_all_bot() {
                let r1_prod = small_solver(&a1_k, &b1)?;
                // Witness matrix: first sampled index attaining the minimum.
                let mut s1 = vec![vec![usize::MAX; n3]; n1];
                for i in 0..n1 {
                    for j in 0..n3 {
                        let Some(target) = r1_prod.get(i, j) else { continue };
                        for (kidx, &k) in sample.iter().enumerate() {
                            if let (Some(x), Some(y)) = (a1.get(i, k), b1.get(k, j)) {
                                if x + y == target {
                                    s1[i][j] = kidx;
                                    break;
                                }
                            }
                        }
                    }
                }
                for z in 0..=2i64 {
                    // R[i,j] = T̃ + z where the base-q prefix matches R1.
                    let mut r = MaskedMatrix::all_bot(n1, n3);
                    for i in 0..n1 {
                        for j in 0..n3 {
                            let (Some(approx), Some(r1)) =
                                (t_approx.get(i, j), r1_prod.get(i, j))
                            else {
                                continue;
                            };
                            if (approx + z) / q == r1 {
                                r.set(i, j, Some(approx + z));
                            }
                        }
                    }
                    if r.is_all_bot() {
                        continue;
                    }
                    // Rank-(r1·q) decomposition: each sampled column of A1
                    // is duplicated q times (adding ℓ to the ℓ-th copy).
                    let r_rank = sample.len() * q as usize;
                    let mut u_mat = vec![vec![0i64; r_rank]; n1];
                    let mut v_mat = vec![vec![0i64; n3]; r_rank];
                    for (kidx, &k) in sample.iter().enumerate() {
                        for l in 0..q as usize {
                            let col = kidx * q as usize + l;
                            for i in 0..n1 {
                                u_mat[i][col] = q * a1.get(i, k).unwrap_or(0) + l as i64;
                            }
                            for j in 0..n3 {
                                v_mat[col][j] = q * b1.get(k, j).unwrap_or(0);
                            }
                        }
                    }
                    let mut s_mat = MaskedMatrix::all_bot(n1, n3);
                    for i in 0..n1 {
                        for j in 0..n3 {
                            let Some(val) = r.get(i, j) else { continue };
                            if s1[i][j] == usize::MAX {
                                // No sampled witness: drop the entry to keep
                                // the decomposition valid.
                                continue;
                            }
                            let sel = s1[i][j] * q as usize + (val.rem_euclid(q)) as usize;
                            s_mat.set(i, j, Some(sel as i64 + 1));
                        }
                    }
                    let r = r.filter(|i, j, _| s_mat.get(i, j).is_some());
                    if r.is_all_bot() {
                        continue;
                    }
                    let decomp = RankDecomposition { r: r_rank, u: u_mat, v: v_mat, s: s_mat };
                    let inst = TriangleInstance::new(a.clone(), b.clone(), r)?;
                    let td = TargetedDecomposition::of_c(decomp);
                    // One witness per C-edge via bit probing over the inner
                    // dimension; restrictions of A leave the decomposition
                    // of C valid.
                    let lists = crate::triangle::list_c_witnesses_exact_triangle(
                        &inst,
                        1,
                        &|sub: &TriangleInstance| triangle_solver(sub, &td),
                        rng.gen(),
                        4.0,
                    )?;
                    for i in 0..n1 {
                        for j in 0..n3 {
                            for &k in &lists[i][j] {
                                let full = a.get(i, k).unwrap() + b.get(k, j).unwrap();
                                c.set(i, j, entry_min(c.get(i, j), Some(full)));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Doubling reduction
// ---------------------------------------------------------------------------

/// Reduces an arbitrary (nonnegative-universe) min-plus product to
/// uniform / regular / low-doubling min-plus products, via the level/offset
/// scaling scheme and the low-rank-to-low-doubling reduction.
///
/// `solver` computes min-plus products of the emitted structured instances
/// (and their restrictions, for witness listing).
pub fn doubling_reduction(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    k_bound: i64,
    solver: &MinPlusSolver,
    seed: u64,
    knobs: &Knobs,
) -> Result<MaskedMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape("doubling reduction: inner dimensions disagree"));
    }
    if k_bound < 1 {
        return Err(Error::domain("doubling bound must be ≥ 1"));
    }
    a.check_universe(0, i64::MAX)?;
    b.check_universe(0, i64::MAX)?;
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = MaskedMatrix::all_bot(n1, n3);
    if a.is_all_bot() || b.is_all_bot() {
        return Ok(c);
    }

    let t = knobs
        .t_doubling
        .unwrap_or_else(|| (k_bound as u64).saturating_mul(k_bound as u64))
        .max(2);
    let ln_out = ((n1 * n3) as f64 + 1.0).ln();
    let u = a.max_entry().unwrap_or(0).max(b.max_entry().unwrap_or(0));
    // Smallest L with 2^L > u, so that ⌊·/2^L⌋ collapses to {0, ⊥}.
    let levels = if u == 0 { 0 } else { 64 - u.leading_zeros() as i64 };

    // Exceptionally popular pairs: a sparse sample of the inner dimension
    // hits one of their many witnesses.
    {
        let rate = (4.0 * ln_out / t as f64).min(1.0);
        for k in 0..n2 {
            if rng.gen::<f64>() >= rate {
                continue;
            }
            for i in 0..n1 {
                let Some(x) = a.get(i, k) else { continue };
                for j in 0..n3 {
                    if let Some(y) = b.get(k, j) {
                        c.set(i, j, entry_min(c.get(i, j), Some(x + y)));
                    }
                }
            }
        }
    }

    // Exceptionally unpopular pairs: at most t joint-support indices; list
    // them all in the {0, ⊥} support product.
    {
        let a_support = a.map_present(|_| 0);
        let b_support = b.map_present(|_| 0);
        let lists = list_witnesses_min_plus(
            &a_support,
            &b_support,
            t as usize,
            solver,
            rng.gen(),
            knobs.rep_c,
        )?;
        for i in 0..n1 {
            for j in 0..n3 {
                for &k in &lists[i][j] {
                    let full = a.get(i, k).unwrap() + b.get(k, j).unwrap();
                    c.set(i, j, entry_min(c.get(i, j), Some(full)));
                }
            }
        }
    }

    // Ordinary pairs: a sampled low-rank approximation R, refined over all
    // scales and offsets through the low-rank → low-doubling reduction.
    let rate = (4.0 * ln_out / t as f64).min(1.0);
    let sample: Vec<usize> = (0..n2).filter(|_| rng.gen::<f64>() < rate).collect();
    if sample.is_empty() {
        return Ok(c);
    }
    let in_sample: Vec<bool> = {
        let mut v = vec![false; n2];
        for &k in &sample {
            v[k] = true;
        }
        v
    };
    let a_restr = a.filter(|_, k, _| in_sample[k]);
    let b_restr = b.filter(|k, _, _| in_sample[k]);
    if a_restr.is_all_bot() || b_restr.is_all_bot() {
        return Ok(c);
    }
    let r_matrix = min_plus_brute(&a_restr, &b_restr)?;
    // Witness matrix for the sampled product.
    let mut s_wit = vec![vec![usize::MAX; n3]; n1];
    for i in 0..n1 {
        for j in 0..n3 {
            let Some(target) = r_matrix.get(i, j) else { continue };
            for (kidx, &k) in sample.iter().enumerate() {
                if let (Some(x), Some(y)) = (a.get(i, k), b.get(k, j)) {
                    if x + y == target {
                        s_wit[i][j] = kidx;
                        break;
                    }
                }
            }
        }
    }

    for level in 0..=levels {
        let pow = 1i64 << level;
        let half = pow / 2;
        for x in 0..2i64 {
            // A_{ℓ,x}: entries with (value mod 2^ℓ) on the x-th side of 2^{ℓ−1}.
            let a_part = a.filter(|_, _, v| {
                let rem = v.rem_euclid(pow);
                (x == 0) == (rem < half || pow == 1)
            });
            if a_part.is_all_bot() {
                continue;
            }
            let a_scaled = a_part.map_present(|v| v / pow);
            for y in 0..2i64 {
                let b_part = b.filter(|_, _, v| {
                    let rem = v.rem_euclid(pow);
                    (y == 0) == (rem < half || pow == 1)
                });
                if b_part.is_all_bot() {
                    continue;
                }
                let b_scaled = b_part.map_present(|v| v / pow);
                for z in 0..=3i64 {
                    let r_lz = r_matrix.map_present(|v| v / pow - z);
                    // Rank-2r decomposition of R_{ℓ,z}: one copy per carry bit.
                    let r_rank = sample.len() * 2;
                    let mut u_mat = vec![vec![0i64; r_rank]; n1];
                    let mut v_mat = vec![vec![0i64; n3]; r_rank];
                    for (kidx, &k) in sample.iter().enumerate() {
                        for carry in 0..2usize {
                            let col = kidx * 2 + carry;
                            for i in 0..n1 {
                                u_mat[i][col] =
                                    a.get(i, k).map_or(0, |v| v / pow) + carry as i64 - z;
                            }
                            for j in 0..n3 {
                                v_mat[col][j] = b.get(k, j).map_or(0, |v| v / pow);
                            }
                        }
                    }
                    let mut s_mat = MaskedMatrix::all_bot(n1, n3);
                    for i in 0..n1 {
                        for j in 0..n3 {
                            if r_lz.get(i, j).is_none() || s_wit[i][j] == usize::MAX {
                                continue;
                            }
                            let kidx = s_wit[i][j];
                            let k = sample[kidx];
                            let x_val = a.get(i, k).unwrap();
                            let y_val = b.get(k, j).unwrap();
                            let carry =
                                (x_val + y_val) / pow - x_val / pow - y_val / pow;
                            debug_assert!(carry == 0 || carry == 1);
                            s_mat.set(i, j, Some((kidx * 2 + carry as usize) as i64 + 1));
                        }
                    }
                    let r_lz = r_lz.filter(|i, j, _| s_mat.get(i, j).is_some());
                    if r_lz.is_all_bot() {
                        continue;
                    }
                    let decomp =
                        RankDecomposition { r: r_rank, u: u_mat, v: v_mat, s: s_mat };
                    let inst =
                        TriangleInstance::new(a_scaled.clone(), b_scaled.clone(), r_lz)?;
                    let out = reduce_low_rank_to_low_doubling(
                        &inst,
                        &TargetedDecomposition::of_c(decomp),
                        k_bound,
                        knobs,
                    )?;
                    for &(i, k, j) in &out.exceptional {
                        if let (Some(xv), Some(yv)) = (a.get(i, k), b.get(k, j)) {
                            c.set(i, j, entry_min(c.get(i, j), Some(xv + yv)));
                        }
                    }
                    for ri in &out.instances {
                        let sub = &ri.adjustment.instance;
                        if sub.a.is_all_bot() || sub.b.is_all_bot() {
                            continue;
                        }
                        let lists = list_witnesses_min_plus(
                            &sub.a,
                            &sub.b,
                            t as usize,
                            solver,
                            rng.gen(),
                            knobs.rep_c,
                        )?;
                        for i in 0..n1 {
                            for j in 0..n3 {
                                for &k in &lists[i][j] {
                                    if let (Some(xv), Some(yv)) = (a.get(i, k), b.get(k, j)) {
                                        c.set(i, j, entry_min(c.get(i, j), Some(xv + yv)));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Hash-based universe compression
// ---------------------------------------------------------------------------

/// A pluggable provider of sum-order-preserving hashes: given the entry set,
/// produce a hashable subdomain and the hash, or report failure.
pub type HashSource<'a> = dyn Fn(&IntegerSet) -> HashSearchOutcome + 'a;

/// Computes `A * B` by compressing the entry universe through a sum-order
/// preserving hash: cover `X ⊆ Y + S` by greedy covering, enumerate shift
/// pairs `(s, t) ∈ S × S`, hash the shifted matrices, solve each compressed
/// instance with `small_solver`, and transfer witnesses back.
///
/// Fails with [`Error::HashUnavailable`] when the hash source cannot produce
/// a hash (the reduction is conditional on one existing).
pub fn hash_universe_compression(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    hash_source: &HashSource,
    small_solver: &MinPlusSolver,
    _seed: u64,
) -> Result<MaskedMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape("hash compression: inner dimensions disagree"));
    }
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());
    let mut c = MaskedMatrix::all_bot(n1, n3);
    let mut entries = a.distinct_entries();
    entries.extend(b.distinct_entries());
    let x = IntegerSet::new(entries);
    if x.is_empty() {
        return Ok(c);
    }
    let (domain, hash) = match hash_source(&x) {
        HashSearchOutcome::Found { domain, hash, .. } => (domain, hash),
        HashSearchOutcome::Budget => {
            return Err(Error::HashUnavailable("hash search budget exhausted".into()))
        }
        HashSearchOutcome::NoneExists => {
            return Err(Error::HashUnavailable("no sum-order-preserving hash exists".into()))
        }
    };
    let shifts = greedy_cover(&x, &domain)?;

    let apply_hash = |m: &MaskedMatrix, shift: i64, h: &SumOrderHash| -> MaskedMatrix {
        let mut out = MaskedMatrix::all_bot(m.rows(), m.cols());
        for (i, j, v) in m.iter_present() {
            if let Some(hv) = h.apply(v - shift) {
                out.set(i, j, Some(hv));
            }
        }
        out
    };

    for s in shifts.iter() {
        let a_s = apply_hash(a, s, &hash);
        if a_s.is_all_bot() {
            continue;
        }
        for t in shifts.iter() {
            let b_t = apply_hash(b, t, &hash);
            if b_t.is_all_bot() {
                continue;
            }
            let compressed = small_solver(&a_s, &b_t)?;
            for i in 0..n1 {
                for j in 0..n3 {
                    let Some(target) = compressed.get(i, j) else { continue };
                    for k in 0..n2 {
                        if let (Some(ha), Some(hb)) = (a_s.get(i, k), b_t.get(k, j)) {
                            if ha + hb == target {
                                let full = a.get(i, k).unwrap() + b.get(k, j).unwrap();
                                c.set(i, j, entry_min(c.get(i, j), Some(full)));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(c)
}
