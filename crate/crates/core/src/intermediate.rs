//! Intermediate-complexity matrix products and the gadget reductions that
//! connect them to min-plus products, each paired with a brute-force
//! definition for cross-validation.

use serde::{Deserialize, Serialize};

use crate::addcomb::{difference_set, sumset, IntegerSet};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::matrix::{entry_min, MaskedMatrix};

// ---------------------------------------------------------------------------
// Brute-force product definitions
// ---------------------------------------------------------------------------

fn check_boolean(m: &MaskedMatrix, name: &str) -> Result<()> {
    for (i, j, v) in m.iter_present() {
        if v != 0 && v != 1 {
            return Err(Error::domain(format!(
                "{name}[{i},{j}] = {v} is not boolean"
            )));
        }
    }
    if m.count_present() != m.rows() * m.cols() {
        return Err(Error::domain(format!("{name} must have no ⊥ entries")));
    }
    Ok(())
}

/// Min product: `C[i,j] = min {A[i,k] : B[k,j] = 1}` with a boolean `B`.
pub fn min_product_brute(a: &MaskedMatrix, b01: &MaskedMatrix) -> Result<MaskedMatrix> {
    if a.cols() != b01.rows() {
        return Err(Error::shape("min product: inner dimensions disagree"));
    }
    check_boolean(b01, "B")?;
    let mut c = MaskedMatrix::all_bot(a.rows(), b01.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let Some(x) = a.get(i, k) else { continue };
            for j in 0..b01.cols() {
                if b01.get(k, j) == Some(1) {
                    c.set(i, j, entry_min(c.get(i, j), Some(x)));
                }
            }
        }
    }
    Ok(c)
}

/// Min-max product: `C[i,j] = min_k max{A[i,k], B[k,j]}` (pairs with a ⊥
/// entry are skipped).
pub fn min_max_brute(a: &MaskedMatrix, b: &MaskedMatrix) -> Result<MaskedMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape("min-max product: inner dimensions disagree"));
    }
    let mut c = MaskedMatrix::all_bot(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let Some(x) = a.get(i, k) else { continue };
            for j in 0..b.cols() {
                if let Some(y) = b.get(k, j) {
                    c.set(i, j, entry_min(c.get(i, j), Some(x.max(y))));
                }
            }
        }
    }
    Ok(c)
}

/// Min-equality product: `C[i,j] = min {A[i,k] : A[i,k] = B[k,j]}`.
pub fn min_eq_brute(a: &MaskedMatrix, b: &MaskedMatrix) -> Result<MaskedMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape("min-equality product: inner dimensions disagree"));
    }
    let mut c = MaskedMatrix::all_bot(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let Some(x) = a.get(i, k) else { continue };
            for j in 0..b.cols() {
                if b.get(k, j) == Some(x) {
                    c.set(i, j, entry_min(c.get(i, j), Some(x)));
                }
            }
        }
    }
    Ok(c)
}

/// Min-witness product of boolean matrices: `C[i,j] = min {k : A[i,k] =
/// B[k,j] = 1}` (0-based indices; ⊥ when no such `k` exists).
pub fn min_witness_brute(a01: &MaskedMatrix, b01: &MaskedMatrix) -> Result<MaskedMatrix> {
    if a01.cols() != b01.rows() {
        return Err(Error::shape("min-witness product: inner dimensions disagree"));
    }
    check_boolean(a01, "A")?;
    check_boolean(b01, "B")?;
    let mut c = MaskedMatrix::all_bot(a01.rows(), b01.cols());
    for i in 0..a01.rows() {
        for j in 0..b01.cols() {
            for k in 0..a01.cols() {
                if a01.get(i, k) == Some(1) && b01.get(k, j) == Some(1) {
                    c.set(i, j, Some(k as i64));
                    break;
                }
            }
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Min-plus → min product / min-equality / min-witness
// ---------------------------------------------------------------------------

/// Min-plus product encoded as a min product: the inner dimension is
/// `[n2] × X` with `A'[i,(k,x)] = A[i,k] + x` and `B'[(k,x),j] = [B[k,j] = x]`.
#[derive(Debug, Clone)]
pub struct MinProductReduction {
    pub a_prime: MaskedMatrix,
    pub b_prime: MaskedMatrix,
    pub entry_set: IntegerSet,
}

pub fn reduce_minplus_to_min_product(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
) -> Result<MinProductReduction> {
    if a.cols() != b.rows() {
        return Err(Error::shape("reduction: inner dimensions disagree"));
    }
    let mut entries = a.distinct_entries();
    entries.extend(b.distinct_entries());
    let x_set = IntegerSet::new(entries);
    let n2 = a.cols();
    let width = (n2 * x_set.len()).max(1);
    let mut a_prime = MaskedMatrix::all_bot(a.rows(), width);
    let mut b_prime = MaskedMatrix::all_bot(width, b.cols());
    for (xi, x) in x_set.iter().enumerate() {
        for k in 0..n2 {
            let col = k * x_set.len() + xi;
            for i in 0..a.rows() {
                if let Some(v) = a.get(i, k) {
                    a_prime.set(i, col, Some(v + x));
                }
            }
            for j in 0..b.cols() {
                b_prime.set(col, j, Some(i64::from(b.get(k, j) == Some(x))));
            }
        }
    }
    Ok(MinProductReduction { a_prime, b_prime, entry_set: x_set })
}

impl MinProductReduction {
    /// The min product of the augmented matrices is exactly `A * B`.
    pub fn decode(&self, c_prime: &MaskedMatrix) -> MaskedMatrix {
        c_prime.clone()
    }
}

/// Min-plus product encoded as a min-equality product over the inner
/// dimension `[n2] × Z` with `Z = X − X`.
#[derive(Debug, Clone)]
pub struct MinEqualityReduction {
    pub a_prime: MaskedMatrix,
    pub b_prime: MaskedMatrix,
    pub z_set: IntegerSet,
}

pub fn reduce_minplus_to_min_equality(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
) -> Result<MinEqualityReduction> {
    if a.cols() != b.rows() {
        return Err(Error::shape("reduction: inner dimensions disagree"));
    }
    let mut entries = a.distinct_entries();
    entries.extend(b.distinct_entries());
    let x_set = IntegerSet::new(entries);
    let z_set = difference_set(&x_set, &x_set);
    let n2 = a.cols();
    let width = (n2 * z_set.len()).max(1);
    let mut a_prime = MaskedMatrix::all_bot(a.rows(), width);
    let mut b_prime = MaskedMatrix::all_bot(width, b.cols());
    for (zi, z) in z_set.iter().enumerate() {
        for k in 0..n2 {
            let col = k * z_set.len() + zi;
            for i in 0..a.rows() {
                if let Some(v) = a.get(i, k) {
                    a_prime.set(i, col, Some(2 * v - z));
                }
            }
            for j in 0..b.cols() {
                if let Some(v) = b.get(k, j) {
                    b_prime.set(col, j, Some(2 * v + z));
                }
            }
        }
    }
    Ok(MinEqualityReduction { a_prime, b_prime, z_set })
}

impl MinEqualityReduction {
    /// The min-equality product of the augmented matrices is exactly `A * B`.
    pub fn decode(&self, c_prime: &MaskedMatrix) -> MaskedMatrix {
        c_prime.clone()
    }
}

/// Min-plus product encoded as a min-witness product. Inner triples
/// `(k, x, y)` are sorted by `x + y` (ties by `(x, y, k)`), so the least
/// witness decodes both the minimum sum and a witness.
#[derive(Debug, Clone)]
pub struct MinWitnessReduction {
    pub a_prime: MaskedMatrix,
    pub b_prime: MaskedMatrix,
    /// The inner-dimension order: position → `(k, x, y)`.
    pub order: Vec<(usize, i64, i64)>,
}

pub fn reduce_minplus_to_min_witness(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
) -> Result<MinWitnessReduction> {
    if a.cols() != b.rows() {
        return Err(Error::shape("reduction: inner dimensions disagree"));
    }
    let mut entries = a.distinct_entries();
    entries.extend(b.distinct_entries());
    let x_set = IntegerSet::new(entries);
    let mut order: Vec<(usize, i64, i64)> = Vec::new();
    for k in 0..a.cols() {
        for x in x_set.iter() {
            for y in x_set.iter() {
                order.push((k, x, y));
            }
        }
    }
    order.sort_by_key(|&(k, x, y)| (x + y, x, y, k));
    let width = order.len().max(1);
    let mut a_prime = MaskedMatrix::all_bot(a.rows(), width);
    let mut b_prime = MaskedMatrix::all_bot(width, b.cols());
    for (pos, &(k, x, y)) in order.iter().enumerate() {
        for i in 0..a.rows() {
            a_prime.set(i, pos, Some(i64::from(a.get(i, k) == Some(x))));
        }
        for j in 0..b.cols() {
            b_prime.set(pos, j, Some(i64::from(b.get(k, j) == Some(y))));
        }
    }
    if order.is_empty() {
        // Degenerate all-⊥ inputs: fill the single dummy column.
        for i in 0..a.rows() {
            a_prime.set(i, 0, Some(0));
        }
        for j in 0..b.cols() {
            b_prime.set(0, j, Some(0));
        }
    }
    Ok(MinWitnessReduction { a_prime, b_prime, order })
}

impl MinWitnessReduction {
    /// Decodes the min-witness product into the min-plus product and a
    /// witness matrix.
    pub fn decode(&self, c_prime: &MaskedMatrix) -> (MaskedMatrix, MaskedMatrix) {
        let mut values = MaskedMatrix::all_bot(c_prime.rows(), c_prime.cols());
        let mut witnesses = MaskedMatrix::all_bot(c_prime.rows(), c_prime.cols());
        for (i, j, pos) in c_prime.iter_present() {
            let (k, x, y) = self.order[pos as usize];
            values.set(i, j, Some(x + y));
            witnesses.set(i, j, Some(k as i64));
        }
        (values, witnesses)
    }
}

// ---------------------------------------------------------------------------
// Bounded-difference / monotone transform
// ---------------------------------------------------------------------------

/// Offset records of [`monotone_bd_transform`], sufficient to reconstruct
/// the original min-plus product exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdOffsets {
    pub c: i64,
    pub row_offsets: Vec<i64>,
    pub col_offsets: Vec<i64>,
    /// Universe bound of the normalized A (entries in `{0..u}`).
    pub u: i64,
    /// Fixed shift `n2 · c` added by the monotonization step.
    pub fixed_shift: i64,
}

/// Output of [`monotone_bd_transform`].
#[derive(Debug, Clone)]
pub struct BdTransform {
    pub a: MaskedMatrix,
    pub b: MaskedMatrix,
    pub offsets: BdOffsets,
}

/// Checks that a full matrix is row-bounded-difference with constant `c`,
/// returning the first offending index otherwise.
pub fn check_row_bounded_difference(a: &MaskedMatrix, c: i64) -> Result<()> {
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let Some(v) = a.get(i, k) else {
                return Err(Error::domain(format!(
                    "row-BD matrix must be total, ⊥ at ({i}, {k})"
                )));
            };
            if k + 1 < a.cols() {
                if let Some(next) = a.get(i, k + 1) {
                    if (v - next).abs() > c {
                        return Err(Error::domain(format!(
                            "row-BD violation at ({i}, {k}): |{v} - {next}| > {c}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// The four-step transform: normalizes a row-bounded-difference `A` (constant
/// `c`) and an arbitrary `B` (⊥ allowed) into a row-monotone, row-BD(2c)
/// matrix `A'` and a column-monotone, column-BD(2c) matrix `B'` over a
/// universe of size `O(n)`, such that `A * B` is reconstructible from
/// `A' * B'` and the recorded offsets.
pub fn monotone_bd_transform(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    c: i64,
) -> Result<BdTransform> {
    if a.cols() != b.rows() {
        return Err(Error::shape("bd transform: inner dimensions disagree"));
    }
    if c < 0 {
        return Err(Error::domain("difference constant must be nonnegative"));
    }
    check_row_bounded_difference(a, c)?;
    let n2 = a.cols();

    // Step 1: make A small-universe by subtracting each row's minimum.
    let row_offsets: Vec<i64> = (0..a.rows())
        .map(|i| (0..n2).filter_map(|k| a.get(i, k)).min().expect("total matrix"))
        .collect();
    let mut a1 = MaskedMatrix::all_bot(a.rows(), n2);
    for (i, k, v) in a.iter_present() {
        a1.set(i, k, Some(v - row_offsets[i]));
    }
    let u = a1.max_entry().unwrap_or(0);

    // Step 2: make B small-universe. Entries above b_j + 2u and ⊥ entries
    // cannot matter; cap them at b_j + 2u + 1, then subtract b_j.
    let col_offsets: Vec<i64> = (0..b.cols())
        .map(|j| (0..n2).filter_map(|k| b.get(k, j)).min().unwrap_or(0))
        .collect();
    let cap = 2 * u + 1;
    let mut b2 = MaskedMatrix::all_bot(n2, b.cols());
    for k in 0..n2 {
        for j in 0..b.cols() {
            let val = match b.get(k, j) {
                Some(v) if v - col_offsets[j] <= 2 * u => v - col_offsets[j],
                _ => cap,
            };
            b2.set(k, j, Some(val));
        }
    }

    // Step 3: make B column-bounded-difference by the distance transform
    // B'[k,j] = min_k' (B[k',j] + |k'−k|·c), computed by the two-pass
    // dynamic program (left-to-right and right-to-left sweeps).
    let mut b3 = b2.clone();
    for j in 0..b.cols() {
        // Left pass.
        for k in 1..n2 {
            let prev = b3.get(k - 1, j).unwrap() + c;
            let cur = b3.get(k, j).unwrap();
            b3.set(k, j, Some(cur.min(prev)));
        }
        // Right pass.
        for k in (0..n2 - 1).rev() {
            let prev = b3.get(k + 1, j).unwrap() + c;
            let cur = b3.get(k, j).unwrap();
            b3.set(k, j, Some(cur.min(prev)));
        }
    }

    // Step 4: monotonize. A[i,k] += k·c makes rows nondecreasing; B[k,j] +=
    // (n2−k)·c makes columns nonincreasing; the product shifts by n2·c.
    let mut a4 = a1.clone();
    for (i, k, v) in a1.iter_present() {
        a4.set(i, k, Some(v + k as i64 * c));
    }
    let mut b4 = b3.clone();
    for (k, j, v) in b3.iter_present() {
        b4.set(k, j, Some(v + (n2 - k) as i64 * c));
    }

    Ok(BdTransform {
        a: a4,
        b: b4,
        offsets: BdOffsets {
            c,
            row_offsets,
            col_offsets,
            u,
            fixed_shift: n2 as i64 * c,
        },
    })
}

impl BdTransform {
    /// Reconstructs the original min-plus product from `A' * B'`.
    pub fn reconstruct(&self, product: &MaskedMatrix) -> MaskedMatrix {
        let mut out = MaskedMatrix::all_bot(product.rows(), product.cols());
        for (i, j, v) in product.iter_present() {
            let normalized = v - self.offsets.fixed_shift;
            // Values above the A-universe can only come from capped entries,
            // i.e. from originally-⊥ columns.
            if normalized > self.offsets.u {
                continue;
            }
            out.set(
                i,
                j,
                Some(normalized + self.offsets.row_offsets[i] + self.offsets.col_offsets[j]),
            );
        }
        out
    }

    pub fn is_row_monotone(&self) -> bool {
        (0..self.a.rows()).all(|i| {
            (1..self.a.cols()).all(|k| self.a.get(i, k - 1) <= self.a.get(i, k))
        })
    }

    pub fn is_col_monotone_decreasing(&self) -> bool {
        (0..self.b.cols()).all(|j| {
            (1..self.b.rows()).all(|k| self.b.get(k - 1, j) >= self.b.get(k, j))
        })
    }

    /// Both outputs are bounded-difference with constant `2c`.
    pub fn is_bounded_difference(&self) -> bool {
        let ok_rows = (0..self.a.rows()).all(|i| {
            (1..self.a.cols()).all(|k| {
                (self.a.get(i, k - 1).unwrap() - self.a.get(i, k).unwrap()).abs()
                    <= 2 * self.offsets.c
            })
        });
        let ok_cols = (0..self.b.cols()).all(|j| {
            (1..self.b.rows()).all(|k| {
                (self.b.get(k - 1, j).unwrap() - self.b.get(k, j).unwrap()).abs()
                    <= 2 * self.offsets.c
            })
        });
        ok_rows && ok_cols
    }
}

// ---------------------------------------------------------------------------
// Rank-substitution reduction to the bounded-difference core
// ---------------------------------------------------------------------------

/// Statistics of the rank-substitution construction (for the bad-pair bound
/// `|R| ≤ |X+X|·|X| / L`).
#[derive(Debug, Clone, Copy)]
pub struct BdCoreStats {
    pub entry_count: usize,
    pub sumset_size: usize,
    pub bad_pairs: usize,
    pub l: i64,
}

/// A solver for the bounded-difference core instances: a row-BD matrix times
/// a sparse boolean (`{0, ⊥}`) matrix.
pub type BdSolver<'a> = dyn Fn(&MaskedMatrix, &MaskedMatrix) -> Result<MaskedMatrix> + 'a;

/// Computes `A * B` through the rank-substitution construction: ranks over
/// the sorted sumset replace entries, the `f`-map smooths rank jumps into an
/// `L`-bounded-difference function (good pairs keep `f = rank`), the padded
/// row-BD instance handles good pairs, and the bad pairs are enumerated
/// directly using the regularity of the inputs.
pub fn rank_substitution_bd_reduction(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    l: i64,
    bd_solver: &BdSolver,
    _seed: u64,
) -> Result<(MaskedMatrix, BdCoreStats)> {
    if a.cols() != b.rows() {
        return Err(Error::shape("bd reduction: inner dimensions disagree"));
    }
    if l < 1 {
        return Err(Error::domain("parameter L must be ≥ 1"));
    }
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());
    if a.count_present() != n1 * n2 {
        return Err(Error::domain("A must be total for the rank substitution"));
    }
    let mut entries = a.distinct_entries();
    entries.extend(b.distinct_entries());
    let x_set = IntegerSet::new(entries);
    let d = x_set.len();
    // Regularity 1/D: every value fills at most a 1/D fraction of each row
    // and column of A and B.
    let check_reg = |m: &MaskedMatrix, name: &str| -> Result<()> {
        for i in 0..m.rows() {
            let mut counts = std::collections::HashMap::new();
            for j in 0..m.cols() {
                if let Some(v) = m.get(i, j) {
                    *counts.entry(v).or_insert(0usize) += 1;
                }
            }
            if counts.values().any(|&c| c * d > m.cols()) {
                return Err(Error::domain(format!("{name} is not 1/D-regular (row {i})")));
            }
        }
        for j in 0..m.cols() {
            let mut counts = std::collections::HashMap::new();
            for i in 0..m.rows() {
                if let Some(v) = m.get(i, j) {
                    *counts.entry(v).or_insert(0usize) += 1;
                }
            }
            if counts.values().any(|&c| c * d > m.rows()) {
                return Err(Error::domain(format!("{name} is not 1/D-regular (column {j})")));
            }
        }
        Ok(())
    };
    check_reg(a, "A")?;
    check_reg(b, "B")?;

    let sums = sumset(&x_set, &x_set);
    let rank_of = |x: i64, y: i64| -> i64 {
        sums.as_slice().binary_search(&(x + y)).expect("sum in sumset") as i64
    };
    let select = |r: i64| -> i64 { sums.as_slice()[r as usize] };

    // f: X × X → [|X+X|], initialized to rank and smoothed in descending
    // lexicographic order so that f(x, ·) becomes increasing and L-BD.
    let xs = x_set.as_slice();
    let mut f: Vec<Vec<i64>> = (0..d)
        .map(|xi| (0..d).map(|yi| rank_of(xs[xi], xs[yi])).collect())
        .collect();
    for xi in (0..d).rev() {
        for yi in (0..d.saturating_sub(1)).rev() {
            if f[xi][yi] < f[xi][yi + 1] - l {
                f[xi][yi] = f[xi][yi + 1] - l;
            }
        }
    }
    let mut bad_pairs: Vec<(usize, usize)> = Vec::new();
    for xi in 0..d {
        for yi in 0..d {
            if f[xi][yi] != rank_of(xs[xi], xs[yi]) {
                bad_pairs.push((xi, yi));
            }
        }
    }
    let stats = BdCoreStats {
        entry_count: d,
        sumset_size: sums.len(),
        bad_pairs: bad_pairs.len(),
        l,
    };

    // Good case: padded row-BD instance over columns (k, y) plus dummy
    // interpolation columns. Dummy columns carry per-row values walking
    // toward the next real column, with all-⊥ rows in B'.
    let x_index = |v: i64| xs.binary_search(&v).expect("entry in X");
    let sentinel = sums.len() as i64;

    let gap_within = l.max(1) as usize; // between (k, y) and (k, y')
    let gap_between = sums.len(); // between (k, y_max) and (k+1, y_min)
    // Column layout: for each k: d real columns with gap_within dummies in
    // between, then gap_between dummies before the next k.
    let mut layout: Vec<Option<(usize, usize)>> = Vec::new(); // Some((k, yi)) for real
    for k in 0..n2 {
        for yi in 0..d {
            layout.push(Some((k, yi)));
            if yi + 1 < d {
                layout.extend(std::iter::repeat(None).take(gap_within));
            }
        }
        if k + 1 < n2 {
            layout.extend(std::iter::repeat(None).take(gap_between));
        }
    }
    let width = layout.len();
    let mut a_prime = MaskedMatrix::all_bot(n1, width);
    let mut b_prime = MaskedMatrix::all_bot(width, n3);
    for i in 0..n1 {
        // Real values first.
        let mut values: Vec<i64> = vec![0; width];
        for (pos, slot) in layout.iter().enumerate() {
            if let Some((k, yi)) = slot {
                let xv = a.get(i, *k).unwrap();
                values[pos] = f[x_index(xv)][*yi];
            }
        }
        // Interpolate dummies: walk from the previous real value toward the
        // next one, one step per column.
        let mut pos = 0;
        while pos < width {
            if layout[pos].is_some() {
                pos += 1;
                continue;
            }
            let start = pos;
            let prev = values[start - 1];
            let mut end = start;
            while end < width && layout[end].is_none() {
                end += 1;
            }
            let next = if end < width { values[end] } else { prev };
            for (step, value) in values.iter_mut().enumerate().take(end).skip(start) {
                let delta = (next - prev).clamp(
                    -((step - start + 1) as i64),
                    (step - start + 1) as i64,
                );
                *value = prev + delta;
            }
            pos = end;
        }
        for (pos, v) in values.iter().enumerate() {
            a_prime.set(i, pos, Some(*v));
        }
    }
    for (pos, slot) in layout.iter().enumerate() {
        if let Some((k, yi)) = slot {
            for j in 0..n3 {
                if b.get(*k, j) == Some(xs[*yi]) {
                    b_prime.set(pos, j, Some(0));
                }
            }
        }
    }
    let c_prime = bd_solver(&a_prime, &b_prime)?;
    let mut c = MaskedMatrix::all_bot(n1, n3);
    for (i, j, v) in c_prime.iter_present() {
        if v < sentinel {
            c.set(i, j, Some(select(v)));
        }
    }

    // Bad case: enumerate the bad value pairs and fix the affected cells.
    for &(xi, yi) in &bad_pairs {
        let (xv, yv) = (xs[xi], xs[yi]);
        for k in 0..n2 {
            for i in 0..n1 {
                if a.get(i, k) != Some(xv) {
                    continue;
                }
                for j in 0..n3 {
                    if b.get(k, j) == Some(yv) {
                        c.set(i, j, entry_min(c.get(i, j), Some(xv + yv)));
                    }
                }
            }
        }
    }
    Ok((c, stats))
}

// ---------------------------------------------------------------------------
// Graph gadgets
// ---------------------------------------------------------------------------

/// Decoder for gadget graphs: which vertices carry the `I`/`J` layers and
/// how distances map back to product entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GadgetDecoder {
    pub i_vertices: Vec<usize>,
    pub j_vertices: Vec<usize>,
    /// Value added to every product entry by the gadget.
    pub offset: i64,
    /// Distances at or above this threshold decode to ⊥ (`None` = exact).
    pub threshold: Option<i64>,
    pub node_weighted: bool,
}

impl GadgetDecoder {
    /// Recovers the product matrix by shortest-path computations from every
    /// `I`-vertex.
    pub fn decode(&self, graph: &WeightedGraph) -> Result<MaskedMatrix> {
        let mut out = MaskedMatrix::all_bot(self.i_vertices.len(), self.j_vertices.len());
        for (ii, &src) in self.i_vertices.iter().enumerate() {
            let dist = if self.node_weighted {
                graph.dijkstra_node_weighted(src)?
            } else {
                graph.dijkstra(src)?
            };
            for (jj, &dst) in self.j_vertices.iter().enumerate() {
                if let Some(d) = dist[dst] {
                    if self.threshold.map_or(true, |th| d < th) {
                        out.set(ii, jj, Some(d - self.offset));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Node-weighted 4-layer gadget: `I — K1 — K2 — J` with node weights `10u`
/// on the outer layers and `10u + x` on `(k, x)`; `I`-`J` distances equal
/// `(A*B)[i,j] + 40u`.
pub fn node_weighted_gadget(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
) -> Result<(WeightedGraph, GadgetDecoder)> {
    if a.cols() != b.rows() {
        return Err(Error::shape("gadget: inner dimensions disagree"));
    }
    let mut entries = a.distinct_entries();
    entries.extend(b.distinct_entries());
    let x_set = IntegerSet::new(entries);
    if x_set.len() > a.cols() {
        return Err(Error::domain(format!(
            "entry set has {} values, more than n2 = {}",
            x_set.len(),
            a.cols()
        )));
    }
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());
    let d = x_set.len().max(1);
    let u = x_set.iter().map(|x| x.abs()).max().unwrap_or(0).max(1);

    let n_vertices = n1 + n3 + 2 * n2 * d;
    let mut g = WeightedGraph::new(n_vertices, false);
    let i_of = |i: usize| i;
    let k1_of = |k: usize, xi: usize| n1 + k * d + xi;
    let k2_of = |k: usize, xi: usize| n1 + n2 * d + k * d + xi;
    let j_of = |j: usize| n1 + 2 * n2 * d + j;

    let mut weights = vec![0i64; n_vertices];
    for i in 0..n1 {
        weights[i_of(i)] = 10 * u;
    }
    for j in 0..n3 {
        weights[j_of(j)] = 10 * u;
    }
    for k in 0..n2 {
        for (xi, x) in x_set.iter().enumerate() {
            weights[k1_of(k, xi)] = 10 * u + x;
            weights[k2_of(k, xi)] = 10 * u + x;
        }
    }
    for (i, k, v) in a.iter_present() {
        let xi = x_set.as_slice().binary_search(&v).unwrap();
        g.add_edge(i_of(i), k1_of(k, xi), 0);
    }
    for (k, j, v) in b.iter_present() {
        let xi = x_set.as_slice().binary_search(&v).unwrap();
        g.add_edge(k2_of(k, xi), j_of(j), 0);
    }
    for k in 0..n2 {
        for x1 in 0..d {
            for x2 in 0..d {
                g.add_edge(k1_of(k, x1), k2_of(k, x2), 0);
            }
        }
    }
    g.node_weights = Some(weights);
    // Genuine 3-edge paths weigh at most 42u; any longer I-J path has at
    // least 6 nodes of weight ≥ 9u each, hence ≥ 54u.
    let decoder = GadgetDecoder {
        i_vertices: (0..n1).map(i_of).collect(),
        j_vertices: (0..n3).map(j_of).collect(),
        offset: 40 * u,
        threshold: Some(42 * u + 1),
        node_weighted: true,
    };
    Ok((g, decoder))
}

/// Which min-plus-to-APSP gadget to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApspGadgetVariant {
    /// Directed 3-layer gadget with internal weight-`q` paths; distances
    /// equal the product exactly.
    DirectedLayered,
    /// Undirected 3-layer gadget with edge weights shifted by `u`; distances
    /// equal the product plus `2u` below the `4u` threshold.
    Undirected3Layer,
}

/// Builds the min-plus-to-APSP graph gadget.
pub fn min_plus_to_apsp_graph(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    variant: ApspGadgetVariant,
) -> Result<(WeightedGraph, GadgetDecoder)> {
    if a.cols() != b.rows() {
        return Err(Error::shape("gadget: inner dimensions disagree"));
    }
    let (n1, n2, n3) = (a.rows(), a.cols(), b.cols());
    let n = n1.max(n3);
    match variant {
        ApspGadgetVariant::DirectedLayered => {
            let u = a
                .max_entry()
                .into_iter()
                .chain(b.max_entry())
                .max()
                .unwrap_or(0);
            a.check_universe(0, u.max(0))?;
            b.check_universe(0, u.max(0))?;
            if n2 > n || u > n as i64 {
                return Err(Error::domain("directed gadget requires n2, u ≤ n"));
            }
            let q = ((n2 as i64 * u) / n as i64).max(1);
            let p = 2 * n.div_ceil(n2) as i64;
            debug_assert!(p * q >= u);
            // Layers: I, K = [n2] × {−p..p}, J.
            let band = (2 * p + 1) as usize;
            let n_vertices = n1 + n3 + n2 * band;
            let mut g = WeightedGraph::new(n_vertices, true);
            let i_of = |i: usize| i;
            let k_of = |k: usize, level: i64| n1 + k * band + (level + p) as usize;
            let j_of = |j: usize| n1 + n2 * band + j;
            for (i, k, v) in a.iter_present() {
                let (hi, lo) = (v / q, v % q);
                g.add_edge(i_of(i), k_of(k, -hi), lo);
            }
            for (k, j, v) in b.iter_present() {
                let (hi, lo) = (v / q, v % q);
                g.add_edge(k_of(k, hi), j_of(j), lo);
            }
            for k in 0..n2 {
                for level in -p..p {
                    g.add_edge(k_of(k, level), k_of(k, level + 1), q);
                }
            }
            let decoder = GadgetDecoder {
                i_vertices: (0..n1).map(i_of).collect(),
                j_vertices: (0..n3).map(j_of).collect(),
                offset: 0,
                threshold: None,
                node_weighted: false,
            };
            Ok((g, decoder))
        }
        ApspGadgetVariant::Undirected3Layer => {
            let max = a
                .max_entry()
                .into_iter()
                .chain(b.max_entry())
                .max()
                .unwrap_or(0);
            a.check_universe(0, i64::MAX)?;
            b.check_universe(0, i64::MAX)?;
            let u = max + 1; // entries strictly below u
            let n_vertices = n1 + n2 + n3;
            let mut g = WeightedGraph::new(n_vertices, false);
            let i_of = |i: usize| i;
            let k_of = |k: usize| n1 + k;
            let j_of = |j: usize| n1 + n2 + j;
            for (i, k, v) in a.iter_present() {
                g.add_edge(i_of(i), k_of(k), v + u);
            }
            for (k, j, v) in b.iter_present() {
                g.add_edge(k_of(k), j_of(j), v + u);
            }
            let decoder = GadgetDecoder {
                i_vertices: (0..n1).map(i_of).collect(),
                j_vertices: (0..n3).map(j_of).collect(),
                offset: 2 * u,
                threshold: Some(4 * u),
                node_weighted: false,
            };
            Ok((g, decoder))
        }
    }
}
