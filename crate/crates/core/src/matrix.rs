//! Masked matrices, the ⊥-algebra, and the brute-force baseline solvers.
//!
//! Every matrix in this crate is a [`MaskedMatrix`]: a rectangular integer
//! matrix whose entries are either integers or the missing symbol ⊥
//! (represented as `None`). All arithmetic honors the conventions
//! `x + ⊥ = ⊥`, `min{x, ⊥} = x`, `min ∅ = ⊥`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A matrix entry: an integer or the missing symbol ⊥ (`None`).
///
/// ⊥ is always a distinguished sentinel, never a large integer, so overflow
/// cannot masquerade as a missing entry.
pub type Entry = Option<i64>;

/// Entry addition under the convention `x + ⊥ = ⊥`. Integer overflow aborts.
#[inline]
pub fn entry_add(a: Entry, b: Entry) -> Entry {
    match (a, b) {
        (Some(x), Some(y)) => Some(
            x.checked_add(y)
                .expect("integer overflow in masked-matrix addition"),
        ),
        _ => None,
    }
}

/// Entry minimum under the convention `min{x, ⊥} = x`.
#[inline]
pub fn entry_min(a: Entry, b: Entry) -> Entry {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) => Some(x),
        (None, other) => other,
    }
}

/// Rectangular integer matrix with missing entries, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct MaskedMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Entry>,
}

/// Wire format: `{"rows":n,"cols":m,"entries":[[e,...],...]}` with `null`
/// for ⊥, rows in order.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<Entry>>,
}

impl TryFrom<MatrixRepr> for MaskedMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        if repr.rows == 0 || repr.cols == 0 {
            return Err(Error::shape("matrix dimensions must be positive"));
        }
        if repr.entries.len() != repr.rows || repr.entries.iter().any(|r| r.len() != repr.cols) {
            return Err(Error::shape("entry table does not match declared dimensions"));
        }
        Ok(MaskedMatrix {
            rows: repr.rows,
            cols: repr.cols,
            entries: repr.entries.into_iter().flatten().collect(),
        })
    }
}

impl From<MaskedMatrix> for MatrixRepr {
    fn from(m: MaskedMatrix) -> Self {
        let entries = (0..m.rows)
            .map(|i| m.entries[i * m.cols..(i + 1) * m.cols].to_vec())
            .collect();
        MatrixRepr { rows: m.rows, cols: m.cols, entries }
    }
}

impl MaskedMatrix {
    /// All-⊥ matrix of the given shape. Panics on zero dimensions.
    pub fn all_bot(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        MaskedMatrix { rows, cols, entries: vec![None; rows * cols] }
    }

    /// Constant matrix filled with `value`.
    pub fn constant(rows: usize, cols: usize, value: i64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        MaskedMatrix { rows, cols, entries: vec![Some(value); rows * cols] }
    }

    /// Builds a matrix from a row-major table of entries.
    pub fn from_rows(rows: Vec<Vec<Entry>>) -> Result<Self> {
        let repr = MatrixRepr {
            rows: rows.len(),
            cols: rows.first().map_or(0, |r| r.len()),
            entries: rows,
        };
        repr.try_into()
    }

    /// Convenience constructor from plain integers (no ⊥ entries).
    pub fn from_dense(rows: Vec<Vec<i64>>) -> Result<Self> {
        Self::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(Some).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Entry {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Entry) {
        self.entries[i * self.cols + j] = value;
    }

    /// Iterates over `(row, col, value)` for all non-⊥ entries.
    pub fn iter_present(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        self.entries.iter().enumerate().filter_map(move |(idx, e)| {
            e.map(|v| (idx / self.cols, idx % self.cols, v))
        })
    }

    pub fn count_present(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_all_bot(&self) -> bool {
        self.entries.iter().all(|e| e.is_none())
    }

    /// Largest non-⊥ entry, or `None` when the matrix is all-⊥.
    pub fn max_entry(&self) -> Option<i64> {
        self.entries.iter().flatten().copied().max()
    }

    /// Smallest non-⊥ entry, or `None` when the matrix is all-⊥.
    pub fn min_entry(&self) -> Option<i64> {
        self.entries.iter().flatten().copied().min()
    }

    /// Sorted, deduplicated list of the non-⊥ entries.
    pub fn distinct_entries(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.entries.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn transpose(&self) -> MaskedMatrix {
        let mut out = MaskedMatrix::all_bot(self.cols, self.rows);
        for (i, j, v) in self.iter_present() {
            out.set(j, i, Some(v));
        }
        out
    }

    /// Entry-wise map over the non-⊥ entries.
    pub fn map_present(&self, f: impl Fn(i64) -> i64) -> MaskedMatrix {
        MaskedMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.map(&f)).collect(),
        }
    }

    /// Keeps the entries for which the predicate holds, replacing all others
    /// by ⊥.
    pub fn filter(&self, keep: impl Fn(usize, usize, i64) -> bool) -> MaskedMatrix {
        let mut out = self.clone();
        for idx in 0..out.entries.len() {
            let (i, j) = (idx / out.cols, idx % out.cols);
            if let Some(v) = out.entries[idx] {
                if !keep(i, j, v) {
                    out.entries[idx] = None;
                }
            }
        }
        out
    }

    /// Entry-wise negation of the non-⊥ entries.
    pub fn negate(&self) -> MaskedMatrix {
        self.map_present(|v| v.checked_neg().expect("integer overflow in negation"))
    }

    /// Checks that every non-⊥ entry lies in `{lo, ..., hi}`.
    pub fn check_universe(&self, lo: i64, hi: i64) -> Result<()> {
        for (i, j, v) in self.iter_present() {
            if v < lo || v > hi {
                return Err(Error::domain(format!(
                    "entry {v} at ({i}, {j}) outside universe {{{lo}, ..., {hi}}}"
                )));
            }
        }
        Ok(())
    }

    /// True if the two matrices have a non-⊥ entry at a common position.
    pub fn overlaps(&self, other: &MaskedMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .any(|(a, b)| a.is_some() && b.is_some())
    }
}

/// Checks that `parts` partition `source`: every non-⊥ entry of the source
/// appears, with the same value, in exactly one part, and parts carry no
/// entries outside the source support.
pub fn is_partition(source: &MaskedMatrix, parts: &[&MaskedMatrix]) -> bool {
    if parts
        .iter()
        .any(|p| p.rows() != source.rows() || p.cols() != source.cols())
    {
        return false;
    }
    for i in 0..source.rows() {
        for j in 0..source.cols() {
            let holders: Vec<Entry> = parts
                .iter()
                .map(|p| p.get(i, j))
                .filter(|e| e.is_some())
                .collect();
            match source.get(i, j) {
                Some(v) => {
                    if holders.len() != 1 || holders[0] != Some(v) {
                        return false;
                    }
                }
                None => {
                    if !holders.is_empty() {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// An exact-triangle instance: `A` is `n1×n2`, `B` is `n2×n3`, `C` is `n1×n3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleInstance {
    pub a: MaskedMatrix,
    pub b: MaskedMatrix,
    pub c: MaskedMatrix,
}

impl TriangleInstance {
    pub fn new(a: MaskedMatrix, b: MaskedMatrix, c: MaskedMatrix) -> Result<Self> {
        if a.cols() != b.rows() || a.rows() != c.rows() || b.cols() != c.cols() {
            return Err(Error::shape(format!(
                "incompatible triangle dimensions: A {}x{}, B {}x{}, C {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            )));
        }
        Ok(TriangleInstance { a, b, c })
    }

    pub fn n1(&self) -> usize {
        self.a.rows()
    }

    pub fn n2(&self) -> usize {
        self.a.cols()
    }

    pub fn n3(&self) -> usize {
        self.c.cols()
    }

    /// True iff `(i, k, j)` is an exact triangle: all three entries present
    /// and `A[i,k] + B[k,j] = C[i,j]`.
    #[inline]
    pub fn is_exact(&self, i: usize, k: usize, j: usize) -> bool {
        match (self.a.get(i, k), self.b.get(k, j), self.c.get(i, j)) {
            (Some(x), Some(y), Some(z)) => {
                x.checked_add(y).expect("integer overflow in triangle test") == z
            }
            _ => false,
        }
    }

    /// Sorted, deduplicated joint entry set of all three matrices.
    pub fn joint_entries(&self) -> Vec<i64> {
        let mut v = self.a.distinct_entries();
        v.extend(self.b.distinct_entries());
        v.extend(self.c.distinct_entries());
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Boolean mask with the shape of a matrix; one flag per edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BoolMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        BoolMatrix { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.cols + j] = v;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|b| *b)
    }

    pub fn union_with(&mut self, other: &BoolMatrix) {
        assert_eq!(self.bits.len(), other.bits.len());
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }
}

/// Per-edge participation flags for the three matrices of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlags {
    pub a: BoolMatrix,
    pub b: BoolMatrix,
    pub c: BoolMatrix,
}

impl EdgeFlags {
    pub fn empty(inst: &TriangleInstance) -> Self {
        EdgeFlags {
            a: BoolMatrix::new(inst.n1(), inst.n2()),
            b: BoolMatrix::new(inst.n2(), inst.n3()),
            c: BoolMatrix::new(inst.n1(), inst.n3()),
        }
    }

    /// Marks all three edges of the triangle `(i, k, j)`.
    pub fn mark(&mut self, i: usize, k: usize, j: usize) {
        self.a.set(i, k, true);
        self.b.set(k, j, true);
        self.c.set(i, j, true);
    }

    pub fn union_with(&mut self, other: &EdgeFlags) {
        self.a.union_with(&other.a);
        self.b.union_with(&other.b);
        self.c.union_with(&other.c);
    }
}

/// Exact triple-loop evaluation of the min-plus product
/// `C[i,j] = min_k (A[i,k] + B[k,j])` under the ⊥-conventions.
pub fn min_plus_brute(a: &MaskedMatrix, b: &MaskedMatrix) -> Result<MaskedMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape(format!(
            "min-plus product: A has {} columns but B has {} rows",
            a.cols(),
            b.rows()
        )));
    }
    let mut c = MaskedMatrix::all_bot(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let Some(x) = a.get(i, k) else { continue };
            for j in 0..b.cols() {
                let sum = entry_add(Some(x), b.get(k, j));
                c.set(i, j, entry_min(c.get(i, j), sum));
            }
        }
    }
    Ok(c)
}

/// Exhaustive enumeration of all `(i, k, j)` triples; flags every edge that
/// participates in some exact triangle.
pub fn exact_triangle_brute(inst: &TriangleInstance) -> EdgeFlags {
    let mut flags = EdgeFlags::empty(inst);
    for i in 0..inst.n1() {
        for k in 0..inst.n2() {
            if inst.a.get(i, k).is_none() {
                continue;
            }
            for j in 0..inst.n3() {
                if inst.is_exact(i, k, j) {
                    flags.mark(i, k, j);
                }
            }
        }
    }
    flags
}

/// All witnesses `k` of each output cell of `A * B`, by brute force.
pub fn min_plus_witnesses_brute(a: &MaskedMatrix, b: &MaskedMatrix) -> Result<Vec<Vec<Vec<usize>>>> {
    let c = min_plus_brute(a, b)?;
    let mut wit = vec![vec![Vec::new(); b.cols()]; a.rows()];
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let Some(target) = c.get(i, j) else { continue };
            for k in 0..a.cols() {
                if entry_add(a.get(i, k), b.get(k, j)) == Some(target) {
                    wit[i][j].push(k);
                }
            }
        }
    }
    Ok(wit)
}

/// Min-plus product over a small universe `{0, ..., u}` via the polynomial
/// encoding: entry `x` becomes the monomial with exponent `x`, matrices of
/// polynomials are multiplied naively (coefficient vectors of length
/// `2u + 1`), and each output cell reads off its smallest exponent with a
/// nonzero coefficient.
pub fn min_plus_small_universe(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    u: i64,
) -> Result<MaskedMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape("min-plus product: inner dimensions disagree"));
    }
    if u < 0 {
        return Err(Error::domain("universe bound must be nonnegative"));
    }
    a.check_universe(0, u)?;
    b.check_universe(0, u)?;

    let width = 2 * u as usize + 1;
    let mut c = MaskedMatrix::all_bot(a.rows(), b.cols());
    let mut coeffs = vec![false; width];
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            coeffs.iter_mut().for_each(|c| *c = false);
            for k in 0..a.cols() {
                if let (Some(x), Some(y)) = (a.get(i, k), b.get(k, j)) {
                    coeffs[(x + y) as usize] = true;
                }
            }
            if let Some(e) = coeffs.iter().position(|c| *c) {
                c.set(i, j, Some(e as i64));
            }
        }
    }
    Ok(c)
}

/// A solver for exact-triangle instances, used as the target of reductions.
pub type TriangleSolver<'a> = dyn Fn(&TriangleInstance) -> Result<EdgeFlags> + 'a;

/// Computes `A * B` given only an exact-triangle solver, by the scaling
/// trick: recurse on `⌊A/2⌋, ⌊B/2⌋`, then test the candidates `2C' + z` for
/// `z ∈ {0, 1, 2}` with three exact-triangle calls per level.
pub fn min_plus_via_exact_triangle(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    solver: &TriangleSolver,
) -> Result<MaskedMatrix> {
    Ok(min_plus_via_exact_triangle_with_stats(a, b, solver)?.0)
}

/// Same as [`min_plus_via_exact_triangle`] but also reports the recursion
/// depth (number of halving levels below the root).
pub fn min_plus_via_exact_triangle_with_stats(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    solver: &TriangleSolver,
) -> Result<(MaskedMatrix, u32)> {
    if a.cols() != b.rows() {
        return Err(Error::shape("min-plus product: inner dimensions disagree"));
    }
    // Shift both matrices to a nonnegative universe so halving terminates;
    // the product shifts by the constant `a_min + b_min`.
    let (Some(a_min), Some(b_min)) = (a.min_entry(), b.min_entry()) else {
        return Ok((MaskedMatrix::all_bot(a.rows(), b.cols()), 0));
    };
    let a0 = a.map_present(|v| v - a_min);
    let b0 = b.map_present(|v| v - b_min);
    let (c0, depth) = scaling_recursion(&a0, &b0, solver)?;
    Ok((c0.map_present(|v| v + a_min + b_min), depth))
}

/// Recursion core of the scaling trick; inputs have nonnegative entries.
fn scaling_recursion(
    a: &MaskedMatrix,
    b: &MaskedMatrix,
    solver: &TriangleSolver,
) -> Result<(MaskedMatrix, u32)> {
    let hi = a
        .max_entry()
        .into_iter()
        .chain(b.max_entry())
        .max()
        .unwrap_or(0);
    if hi == 0 {
        // Universe {0}: one exact-triangle call against the zero candidate
        // detects exactly the supported output cells.
        let mut c = MaskedMatrix::all_bot(a.rows(), b.cols());
        let candidate = MaskedMatrix::constant(a.rows(), b.cols(), 0);
        let inst = TriangleInstance::new(a.clone(), b.clone(), candidate)?;
        let flags = solver(&inst)?;
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                if flags.c.get(i, j) {
                    c.set(i, j, Some(0));
                }
            }
        }
        return Ok((c, 0));
    }

    let half = |m: &MaskedMatrix| m.map_present(|v| v / 2);
    let (c_half, depth) = scaling_recursion(&half(a), &half(b), solver)?;
    let approx = c_half.map_present(|v| 2 * v);

    // A*B lies in [approx, approx + 2]; resolve each cell with three calls.
    let mut c = MaskedMatrix::all_bot(a.rows(), b.cols());
    for z in 0..=2 {
        let candidate = approx.map_present(|v| v + z);
        let inst = TriangleInstance::new(a.clone(), b.clone(), candidate.clone())?;
        let flags = solver(&inst)?;
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                if flags.c.get(i, j) && c.get(i, j).is_none() {
                    c.set(i, j, candidate.get(i, j));
                }
            }
        }
    }
    Ok((c, depth + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<Entry>>) -> MaskedMatrix {
        MaskedMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn min_plus_identity_case() {
        let a = MaskedMatrix::from_dense(vec![vec![0]]).unwrap();
        let c = min_plus_brute(&a, &a).unwrap();
        assert_eq!(c.get(0, 0), Some(0));
    }

    #[test]
    fn min_plus_enumerated_example() {
        // A=[[1,5],[2,⊥]], B=[[3,⊥],[0,4]] → [[4,9],[5,⊥]]
        let a = m(vec![vec![Some(1), Some(5)], vec![Some(2), None]]);
        let b = m(vec![vec![Some(3), None], vec![Some(0), Some(4)]]);
        let c = min_plus_brute(&a, &b).unwrap();
        assert_eq!(c, m(vec![vec![Some(4), Some(9)], vec![Some(5), None]]));
    }

    #[test]
    fn min_plus_all_bot_rhs() {
        let a = MaskedMatrix::from_dense(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let b = MaskedMatrix::all_bot(2, 2);
        let c = min_plus_brute(&a, &b).unwrap();
        assert!(c.is_all_bot());
    }

    #[test]
    fn min_plus_shape_error() {
        let a = MaskedMatrix::all_bot(2, 3);
        let b = MaskedMatrix::all_bot(2, 2);
        assert!(matches!(min_plus_brute(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn exact_triangle_single_forced() {
        let inst = TriangleInstance::new(
            MaskedMatrix::from_dense(vec![vec![1]]).unwrap(),
            MaskedMatrix::from_dense(vec![vec![2]]).unwrap(),
            MaskedMatrix::from_dense(vec![vec![3]]).unwrap(),
        )
        .unwrap();
        let flags = exact_triangle_brute(&inst);
        assert!(flags.a.get(0, 0) && flags.b.get(0, 0) && flags.c.get(0, 0));
    }

    #[test]
    fn exact_triangle_no_c_edge() {
        let inst = TriangleInstance::new(
            MaskedMatrix::constant(3, 2, 1),
            MaskedMatrix::constant(2, 3, 1),
            MaskedMatrix::all_bot(3, 3),
        )
        .unwrap();
        let flags = exact_triangle_brute(&inst);
        assert!(!flags.a.any() && !flags.b.any() && !flags.c.any());
    }

    #[test]
    fn small_universe_boolean_reachability() {
        // u = 0: output is 0 exactly where a boolean path exists.
        let a = m(vec![vec![Some(0), None], vec![None, None]]);
        let b = m(vec![vec![Some(0), None], vec![Some(0), Some(0)]]);
        let c = min_plus_small_universe(&a, &b, 0).unwrap();
        assert_eq!(c, m(vec![vec![Some(0), None], vec![None, None]]));
    }

    #[test]
    fn small_universe_single_entry() {
        let a = MaskedMatrix::from_dense(vec![vec![2]]).unwrap();
        let b = MaskedMatrix::from_dense(vec![vec![3]]).unwrap();
        let c = min_plus_small_universe(&a, &b, 3).unwrap();
        assert_eq!(c.get(0, 0), Some(5));
    }

    #[test]
    fn small_universe_domain_error() {
        let a = MaskedMatrix::from_dense(vec![vec![7]]).unwrap();
        assert!(matches!(
            min_plus_small_universe(&a, &a, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn via_exact_triangle_trivial() {
        let a = MaskedMatrix::from_dense(vec![vec![0]]).unwrap();
        let solver = |inst: &TriangleInstance| Ok(exact_triangle_brute(inst));
        let c = min_plus_via_exact_triangle(&a, &a, &solver).unwrap();
        assert_eq!(c.get(0, 0), Some(0));
    }

    #[test]
    fn via_exact_triangle_recursion_depth() {
        use rand::{Rng, SeedableRng};
        let solver = |inst: &TriangleInstance| Ok(exact_triangle_brute(inst));

        // Universe {0, 1}: one recursion level.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut a = MaskedMatrix::all_bot(4, 4);
        let mut b = MaskedMatrix::all_bot(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                a.set(i, j, Some(rng.gen_range(0..=1)));
                b.set(i, j, Some(rng.gen_range(0..=1)));
            }
        }
        let (c, depth) = min_plus_via_exact_triangle_with_stats(&a, &b, &solver).unwrap();
        assert_eq!(c, min_plus_brute(&a, &b).unwrap());
        assert_eq!(depth, 1);

        // Entries up to 100: depth ⌈log2 100⌉ = 7.
        let mut a = MaskedMatrix::all_bot(8, 8);
        let mut b = MaskedMatrix::all_bot(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                a.set(i, j, Some(rng.gen_range(0..=100)));
                b.set(i, j, Some(rng.gen_range(0..=100)));
            }
        }
        a.set(0, 0, Some(100));
        b.set(0, 0, Some(0));
        let (c, depth) = min_plus_via_exact_triangle_with_stats(&a, &b, &solver).unwrap();
        assert_eq!(c, min_plus_brute(&a, &b).unwrap());
        assert_eq!(depth, 7);
    }

    #[test]
    fn partition_checker() {
        let src = m(vec![vec![Some(1), Some(2)], vec![None, Some(3)]]);
        let p1 = m(vec![vec![Some(1), None], vec![None, Some(3)]]);
        let p2 = m(vec![vec![None, Some(2)], vec![None, None]]);
        assert!(is_partition(&src, &[&p1, &p2]));
        // Entry held by both parts is not a partition.
        assert!(!is_partition(&src, &[&p1, &p1]));
    }

    #[test]
    fn json_round_trip_uses_null_for_bot() {
        let a = m(vec![vec![Some(1), None]]);
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, r#"{"rows":1,"cols":2,"entries":[[1,null]]}"#);
        let back: MaskedMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
    }
}
