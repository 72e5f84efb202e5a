//! Select-plus rank decompositions.
//!
//! A rank-`r` decomposition of a masked matrix `A` is a triple `(U, V, S)`
//! with `U ∈ Z^{n×r}`, `V ∈ Z^{r×m}` and a selector matrix
//! `S ∈ ([r] ∪ {⊥})^{n×m}` such that `A[i,j] = U[i, S[i,j]] + V[S[i,j], j]`
//! exactly on the support of `A`. Selector values are 1-based, matching the
//! serialized form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{entry_add, MaskedMatrix};

/// Dense integer matrix helper for the `U` / `V` factors (no ⊥ entries).
pub type DenseMatrix = Vec<Vec<i64>>;

/// A select-plus rank decomposition witness.
///
/// Serialized as `{"r":r,"U":…,"V":…,"S":…}` with `null` for ⊥ in `S` and
/// 1-based selector values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankDecomposition {
    pub r: usize,
    #[serde(rename = "U")]
    pub u: DenseMatrix,
    #[serde(rename = "V")]
    pub v: DenseMatrix,
    #[serde(rename = "S")]
    pub s: MaskedMatrix,
}

/// How a trivial decomposition bounds the rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrivialMode {
    /// `r ≤ min{n, m}`: one factor is all-zero, the other a copy of `A`.
    Size,
    /// `r ≤ u` for entries in `{1, ..., u}`: `U` all-zero, `V[k, j] = k`.
    Universe(i64),
}

impl RankDecomposition {
    pub fn rows(&self) -> usize {
        self.s.rows()
    }

    pub fn cols(&self) -> usize {
        self.s.cols()
    }

    /// The value `U[i, S[i,j]] + V[S[i,j], j]` realized at `(i, j)`, or ⊥.
    pub fn value_at(&self, i: usize, j: usize) -> Option<i64> {
        self.s.get(i, j).map(|sel| {
            let k = (sel - 1) as usize;
            self.u[i][k] + self.v[k][j]
        })
    }

    /// Rank-0 decomposition of an all-⊥ matrix of the given shape.
    pub fn empty(rows: usize, cols: usize) -> Self {
        RankDecomposition {
            r: 0,
            u: vec![Vec::new(); rows],
            v: Vec::new(),
            s: MaskedMatrix::all_bot(rows, cols),
        }
    }

    /// Restriction to the selector positions where `keep` holds; the factors
    /// are shared unchanged.
    pub fn restrict(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        RankDecomposition {
            r: self.r,
            u: self.u.clone(),
            v: self.v.clone(),
            s: self.s.filter(|i, j, _| keep(i, j)),
        }
    }

    /// The matrix realized by this decomposition (⊥ where `S` is ⊥).
    pub fn realize(&self) -> MaskedMatrix {
        let mut m = MaskedMatrix::all_bot(self.rows(), self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                m.set(i, j, self.value_at(i, j));
            }
        }
        m
    }
}

/// Entry-wise check of the decomposition invariant: `S[i,j] = ⊥ ⇔ A[i,j] = ⊥`,
/// and on the support `A[i,j] = U[i, S[i,j]] + V[S[i,j], j]`.
pub fn verify_decomposition(a: &MaskedMatrix, d: &RankDecomposition) -> Result<bool> {
    if d.s.rows() != a.rows() || d.s.cols() != a.cols() {
        return Err(Error::shape("selector matrix shape differs from target"));
    }
    if d.u.len() != a.rows() || d.u.iter().any(|row| row.len() != d.r) {
        return Err(Error::shape("U must be n×r"));
    }
    if d.v.len() != d.r || d.v.iter().any(|row| row.len() != a.cols()) {
        return Err(Error::shape("V must be r×m"));
    }
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            match (a.get(i, j), d.s.get(i, j)) {
                (None, None) => {}
                (Some(target), Some(sel)) => {
                    if sel < 1 || sel > d.r as i64 {
                        return Ok(false);
                    }
                    let k = (sel - 1) as usize;
                    if d.u[i][k] + d.v[k][j] != target {
                        return Ok(false);
                    }
                }
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

/// Builds a trivial decomposition with `r = min{n, m}` (size mode) or
/// `r = u` (universe mode, entries in `{1, ..., u}`). An all-⊥ matrix gets
/// the rank-0 decomposition.
pub fn trivial_decomposition(a: &MaskedMatrix, mode: TrivialMode) -> Result<RankDecomposition> {
    let (n, m) = (a.rows(), a.cols());
    if a.is_all_bot() {
        return Ok(RankDecomposition::empty(n, m));
    }
    match mode {
        TrivialMode::Size => {
            if n <= m {
                // U all-zero n×n, V row i copies row i of A, S[i,j] = i.
                let u = vec![vec![0; n]; n];
                let mut v = vec![vec![0; m]; n];
                let mut s = MaskedMatrix::all_bot(n, m);
                for (i, j, val) in a.iter_present() {
                    v[i][j] = val;
                    s.set(i, j, Some(i as i64 + 1));
                }
                Ok(RankDecomposition { r: n, u, v, s })
            } else {
                // Vice versa: U column j copies column j of A, V all-zero.
                let mut u = vec![vec![0; m]; n];
                let v = vec![vec![0; m]; m];
                let mut s = MaskedMatrix::all_bot(n, m);
                for (i, j, val) in a.iter_present() {
                    u[i][j] = val;
                    s.set(i, j, Some(j as i64 + 1));
                }
                Ok(RankDecomposition { r: m, u, v, s })
            }
        }
        TrivialMode::Universe(univ) => {
            if univ < 1 {
                return Err(Error::domain("universe mode requires u ≥ 1"));
            }
            a.check_universe(1, univ)?;
            let r = univ as usize;
            let u = vec![vec![0; r]; n];
            let v: DenseMatrix = (1..=univ).map(|k| vec![k; m]).collect();
            let mut s = MaskedMatrix::all_bot(n, m);
            for (i, j, val) in a.iter_present() {
                s.set(i, j, Some(val));
            }
            Ok(RankDecomposition { r, u, v, s })
        }
    }
}

/// Combines decompositions of `A1` and `A2` into a decomposition of the
/// entry-wise sum `A1 + A2` (⊥ wherever either summand is ⊥) with rank
/// `r1 · r2`, indexing factor pairs `(k1, k2)` lexicographically.
pub fn sum_decomposition(
    d1: &RankDecomposition,
    d2: &RankDecomposition,
) -> Result<RankDecomposition> {
    if d1.rows() != d2.rows() || d1.cols() != d2.cols() {
        return Err(Error::shape("sum of decompositions needs equal target shapes"));
    }
    let (n, m) = (d1.rows(), d1.cols());
    let (r1, r2) = (d1.r, d2.r);
    let r = r1 * r2;
    let mut u = vec![vec![0; r]; n];
    let mut v = vec![vec![0; m]; r];
    for i in 0..n {
        for k1 in 0..r1 {
            for k2 in 0..r2 {
                u[i][k1 * r2 + k2] = d1.u[i][k1] + d2.u[i][k2];
            }
        }
    }
    for k1 in 0..r1 {
        for k2 in 0..r2 {
            for j in 0..m {
                v[k1 * r2 + k2][j] = d1.v[k1][j] + d2.v[k2][j];
            }
        }
    }
    let mut s = MaskedMatrix::all_bot(n, m);
    for i in 0..n {
        for j in 0..m {
            if let (Some(s1), Some(s2)) = (d1.s.get(i, j), d2.s.get(i, j)) {
                let idx = (s1 - 1) as usize * r2 + (s2 - 1) as usize;
                s.set(i, j, Some(idx as i64 + 1));
            }
        }
    }
    Ok(RankDecomposition { r, u, v, s })
}

/// The entry-wise sum of two masked matrices (⊥ if either side is ⊥).
pub fn masked_sum(a1: &MaskedMatrix, a2: &MaskedMatrix) -> Result<MaskedMatrix> {
    if a1.rows() != a2.rows() || a1.cols() != a2.cols() {
        return Err(Error::shape("entry-wise sum needs equal shapes"));
    }
    let mut out = MaskedMatrix::all_bot(a1.rows(), a1.cols());
    for i in 0..a1.rows() {
        for j in 0..a1.cols() {
            out.set(i, j, entry_add(a1.get(i, j), a2.get(i, j)));
        }
    }
    Ok(out)
}

/// A conflict-free covering instance: items `x_i ∈ [r]` with conflict sets
/// `C_i ⊆ [r]`, `x_i ∉ C_i`, `|C_i| ≤ s`. Values are 1-based like selectors.
#[derive(Debug, Clone)]
pub struct CoverInstance {
    pub r: usize,
    pub items: Vec<usize>,
    pub conflicts: Vec<Vec<usize>>,
    /// Conflict-size bound used by the potential; at least 1.
    pub s: usize,
}

impl CoverInstance {
    pub fn new(r: usize, items: Vec<usize>, conflicts: Vec<Vec<usize>>) -> Result<Self> {
        if items.len() != conflicts.len() {
            return Err(Error::shape("one conflict set per item required"));
        }
        let mut conflicts = conflicts;
        for (idx, (&x, c)) in items.iter().zip(conflicts.iter_mut()).enumerate() {
            c.sort_unstable();
            c.dedup();
            if x < 1 || x > r {
                return Err(Error::domain(format!("item {idx}: x = {x} outside [1, {r}]")));
            }
            if c.iter().any(|&y| y < 1 || y > r) {
                return Err(Error::domain(format!("item {idx}: conflict outside [1, {r}]")));
            }
            if c.contains(&x) {
                return Err(Error::domain(format!("item {idx}: x_i ∈ C_i")));
            }
        }
        let s = conflicts.iter().map(|c| c.len()).max().unwrap_or(0).max(1);
        Ok(CoverInstance { r, items, conflicts, s })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Output of [`conflict_free_cover`]: the collection `𝓢` and, per item, the
/// index of the set covering it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub sets: Vec<Vec<usize>>,
    pub assignment: Vec<usize>,
}

impl Cover {
    /// `⌈16 · s · ln n⌉ + 1`, the size bound guaranteed by the construction.
    pub fn size_bound(n: usize, s: usize) -> usize {
        (16.0 * s as f64 * (n as f64).ln()).ceil() as usize + 1
    }
}

/// Deterministic conflict-free covering via the method of conditional
/// expectations.
///
/// Builds a collection `𝓢` with `|𝓢| ≤ ⌈16·s·ln n⌉ + 1` such that every item
/// `i` is covered by its assigned set (`x_i ∈ S`, `C_i ∩ S = ∅`). Each set is
/// grown element by element; the next element is located by binary search
/// over dyadic intervals using precomputed `|C_i ∩ J|` statistics, following
/// the potential `φ(S) = |G(S)| − |B(S)|/(2s)`.
pub fn conflict_free_cover(inst: &CoverInstance) -> Result<Cover> {
    let n = inst.len();
    if n == 0 {
        return Ok(Cover { sets: Vec::new(), assignment: Vec::new() });
    }
    let s = inst.s;
    let r_pow = inst.r.next_power_of_two().max(1);
    let levels = r_pow.trailing_zeros() as usize;

    // Dyadic statistics: for each item and each dyadic interval of [r_pow],
    // the counts |C_i ∩ J| and |{x_i} ∩ J|. Intervals are indexed heap-style:
    // level ℓ has r_pow / 2^ℓ intervals of length 2^ℓ.
    // conflict_stats[ℓ][i * width + a] = |C_i ∩ (a·2^ℓ, ..., (a+1)·2^ℓ]|.
    let mut conflict_stats: Vec<Vec<u32>> = Vec::with_capacity(levels + 1);
    let mut item_stats: Vec<Vec<u32>> = Vec::with_capacity(levels + 1);
    {
        let mut conflict_leaf = vec![0u32; n * r_pow];
        let mut item_leaf = vec![0u32; n * r_pow];
        for i in 0..n {
            for &c in &inst.conflicts[i] {
                conflict_leaf[i * r_pow + (c - 1)] += 1;
            }
            item_leaf[i * r_pow + (inst.items[i] - 1)] = 1;
        }
        conflict_stats.push(conflict_leaf);
        item_stats.push(item_leaf);
        for level in 1..=levels {
            let width = r_pow >> level;
            let prev_width = r_pow >> (level - 1);
            let mut c_level = vec![0u32; n * width];
            let mut x_level = vec![0u32; n * width];
            for i in 0..n {
                for a in 0..width {
                    c_level[i * width + a] = conflict_stats[level - 1][i * prev_width + 2 * a]
                        + conflict_stats[level - 1][i * prev_width + 2 * a + 1];
                    x_level[i * width + a] = item_stats[level - 1][i * prev_width + 2 * a]
                        + item_stats[level - 1][i * prev_width + 2 * a + 1];
                }
            }
            conflict_stats.push(c_level);
            item_stats.push(x_level);
        }
    }

    // E_J(G, U) scaled by |J| · 2s to stay in integers:
    //   2s · Σ_{i ∈ U} |{x_i} ∩ J|  −  2s · Σ_{i ∈ G} |C_i ∩ J|  −  Σ_{i ∈ G ∪ U} |C_i ∩ J|.
    let scaled_gain = |level: usize, a: usize, good: &[usize], undecided: &[usize]| -> i64 {
        let width = r_pow >> level;
        let mut total: i64 = 0;
        for &i in undecided {
            total += 2 * s as i64 * i64::from(item_stats[level][i * width + a]);
            total -= i64::from(conflict_stats[level][i * width + a]);
        }
        for &i in good {
            total -= (2 * s as i64 + 1) * i64::from(conflict_stats[level][i * width + a]);
        }
        total
    };

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut assignment = vec![usize::MAX; n];
    let bound = Cover::size_bound(n, s);

    while !remaining.is_empty() {
        if sets.len() >= bound {
            return Err(Error::NonTermination(format!(
                "conflict-free cover exceeded its size bound {bound}"
            )));
        }
        let mut set: Vec<usize> = Vec::new();
        // Partition of the remaining items relative to the growing set.
        let mut good: Vec<usize> = Vec::new();
        let mut undecided: Vec<usize> = remaining.clone();

        // Grow until the good fraction reaches |I| / (16 s).
        while good.len() * 16 * s < remaining.len() {
            // Binary search over dyadic intervals: always descend into the
            // half with the larger expected potential gain (comparisons use
            // the common scaling, halving the length doubles the average).
            let mut level = levels;
            let mut a = 0usize;
            while level > 0 {
                let left = scaled_gain(level - 1, 2 * a, &good, &undecided);
                let right = scaled_gain(level - 1, 2 * a + 1, &good, &undecided);
                a = if left >= right { 2 * a } else { 2 * a + 1 };
                level -= 1;
            }
            let j = a + 1; // 1-based element
            debug_assert!(j <= inst.r, "binary search landed on padding");
            set.push(j);

            // Update the partition: undecided items with x_i = j become
            // good; good/undecided items with j ∈ C_i become bad (dropped).
            let mut next_undecided = Vec::with_capacity(undecided.len());
            for &i in &undecided {
                if inst.conflicts[i].contains(&j) {
                    continue; // bad
                }
                if inst.items[i] == j {
                    good.push(i);
                } else {
                    next_undecided.push(i);
                }
            }
            good.retain(|&i| !inst.conflicts[i].contains(&j));
            undecided = next_undecided;
        }

        set.sort_unstable();
        set.dedup();
        let set_idx = sets.len();
        for &i in &good {
            assignment[i] = set_idx;
        }
        let covered: std::collections::HashSet<usize> = good.iter().copied().collect();
        remaining.retain(|i| !covered.contains(i));
        sets.push(set);
    }

    Ok(Cover { sets, assignment })
}

/// Checks that a cover output is valid for its instance: every item covered
/// by its assigned set.
pub fn verify_cover(inst: &CoverInstance, cover: &Cover) -> bool {
    if cover.assignment.len() != inst.len() {
        return false;
    }
    for i in 0..inst.len() {
        let Some(set) = cover.sets.get(cover.assignment[i]) else {
            return false;
        };
        if !set.contains(&inst.items[i]) {
            return false;
        }
        if inst.conflicts[i].iter().any(|c| set.contains(c)) {
            return false;
        }
    }
    true
}

/// Per-(row, ℓ) and per-(column, ℓ) selector counts of a decomposition,
/// together with the regularity factor they certify.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub r: usize,
    /// `row_counts[i][ℓ] = |{j : S[i,j] = ℓ+1}|`
    pub row_counts: Vec<Vec<u32>>,
    /// `col_counts[j][ℓ] = |{i : S[i,j] = ℓ+1}|`
    pub col_counts: Vec<Vec<u32>>,
}

impl RegularityReport {
    pub fn new(d: &RankDecomposition) -> Self {
        let (n, m) = (d.rows(), d.cols());
        let mut row_counts = vec![vec![0u32; d.r]; n];
        let mut col_counts = vec![vec![0u32; d.r]; m];
        for (i, j, sel) in d.s.iter_present() {
            let k = (sel - 1) as usize;
            row_counts[i][k] += 1;
            col_counts[j][k] += 1;
        }
        RegularityReport { r: d.r, row_counts, col_counts }
    }

    /// `R`-row-regular ⇔ every count ≤ R·m/r (exact rational comparison).
    pub fn is_row_regular(&self, big_r: u64, m: usize) -> bool {
        if self.r == 0 {
            return true;
        }
        self.row_counts.iter().flatten().all(|&c| {
            u128::from(c) * self.r as u128 <= u128::from(big_r) * m as u128
        })
    }

    pub fn is_col_regular(&self, big_r: u64, n: usize) -> bool {
        if self.r == 0 {
            return true;
        }
        self.col_counts.iter().flatten().all(|&c| {
            u128::from(c) * self.r as u128 <= u128::from(big_r) * n as u128
        })
    }
}

/// One part of a regularized decomposition: the sub-matrix together with its
/// decomposition.
#[derive(Debug, Clone)]
pub struct RegularPart {
    pub matrix: MaskedMatrix,
    pub decomp: RankDecomposition,
}

/// Output of [`regularize_decomposition`].
#[derive(Debug, Clone)]
pub struct Regularized {
    /// `R`-row-regular part.
    pub row: RegularPart,
    /// `R`-column-regular part.
    pub col: RegularPart,
    /// Small part with rank ≤ ⌈r/2⌉.
    pub small: RegularPart,
    /// The regularity factor `R = 64·⌈log2(nm) + 1⌉` used.
    pub big_r: u64,
}

/// The regularity factor used throughout: `R = 64·⌈log2(nm) + 1⌉`.
pub fn regularity_factor(n: usize, m: usize) -> u64 {
    let bits = ((n * m) as f64).log2() + 1.0;
    64 * bits.ceil() as u64
}

/// Splits `A = A_row ⊔ A_col ⊔ A_sm` where `A_row` has an `R`-row-regular
/// decomposition, `A_col` an `R`-column-regular one, and `A_sm` one of rank
/// at most `⌈r/2⌉`, built from a conflict-free cover of the irregular
/// entries.
pub fn regularize_decomposition(
    a: &MaskedMatrix,
    d: &RankDecomposition,
) -> Result<Regularized> {
    if !verify_decomposition(a, d)? {
        return Err(Error::domain("input decomposition does not verify"));
    }
    let (n, m) = (a.rows(), a.cols());
    let big_r = regularity_factor(n, m);

    // Small ranks are trivially R-row-regular: counts ≤ m ≤ R·m/r for r ≤ R.
    if d.r as u64 <= big_r {
        return Ok(Regularized {
            row: RegularPart { matrix: a.clone(), decomp: d.clone() },
            col: RegularPart {
                matrix: MaskedMatrix::all_bot(n, m),
                decomp: d.restrict(|_, _| false),
            },
            small: RegularPart {
                matrix: MaskedMatrix::all_bot(n, m),
                decomp: RankDecomposition::empty(n, m),
            },
            big_r,
        });
    }

    let report = RegularityReport::new(d);
    // I_ℓ: rows violating row-regularity for ℓ; J_ℓ: columns violating
    // column-regularity. Exact comparisons: count · r > R · m.
    let violates_row = |i: usize, k: usize| {
        u128::from(report.row_counts[i][k]) * d.r as u128 > u128::from(big_r) * m as u128
    };
    let violates_col = |j: usize, k: usize| {
        u128::from(report.col_counts[j][k]) * d.r as u128 > u128::from(big_r) * n as u128
    };

    let mut row_matrix = MaskedMatrix::all_bot(n, m);
    let mut col_matrix = MaskedMatrix::all_bot(n, m);
    let mut small_matrix = MaskedMatrix::all_bot(n, m);
    let mut irregular: Vec<(usize, usize, usize)> = Vec::new(); // (i, j, sel-1)
    for (i, j, sel) in d.s.iter_present() {
        let k = (sel - 1) as usize;
        let val = a.get(i, j);
        if !violates_row(i, k) {
            row_matrix.set(i, j, val);
        } else if !violates_col(j, k) {
            col_matrix.set(i, j, val);
        } else {
            small_matrix.set(i, j, val);
            irregular.push((i, j, k));
        }
    }

    let row_part = RegularPart {
        decomp: d.restrict(|i, j| {
            d.s.get(i, j)
                .map_or(false, |sel| !violates_row(i, (sel - 1) as usize))
        }),
        matrix: row_matrix,
    };
    let col_part = RegularPart {
        decomp: d.restrict(|i, j| {
            d.s.get(i, j).map_or(false, |sel| {
                let k = (sel - 1) as usize;
                violates_row(i, k) && !violates_col(j, k)
            })
        }),
        matrix: col_matrix,
    };

    // Cover the irregular entries: item x_{i,j} = S[i,j], conflicts are all
    // other ℓ with i ∈ I_ℓ or j ∈ J_ℓ.
    let small_decomp = if irregular.is_empty() {
        RankDecomposition::empty(n, m)
    } else {
        let mut items = Vec::with_capacity(irregular.len());
        let mut conflicts = Vec::with_capacity(irregular.len());
        for &(i, j, k) in &irregular {
            items.push(k + 1);
            let mut conf: Vec<usize> = (0..d.r)
                .filter(|&l| l != k && (violates_row(i, l) || violates_col(j, l)))
                .map(|l| l + 1)
                .collect();
            conf.sort_unstable();
            conflicts.push(conf);
        }
        let cover_inst = CoverInstance::new(d.r, items, conflicts)?;
        let cover = conflict_free_cover(&cover_inst)?;

        let r_sm = cover.sets.len();
        let mut u_sm = vec![vec![0i64; r_sm]; n];
        let mut v_sm = vec![vec![0i64; r_sm]; m]; // transposed fill below
        // U_sm[i, T] = U[i, ℓ] for some ℓ ∈ T with i ∈ I_ℓ (0 otherwise),
        // V_sm[T, j] = V[ℓ, j] for some ℓ ∈ T with j ∈ J_ℓ. The cover
        // guarantees the choices are unique on the irregular entries.
        for (t_idx, set) in cover.sets.iter().enumerate() {
            for i in 0..n {
                if let Some(&l) = set.iter().find(|&&l| violates_row(i, l - 1)) {
                    u_sm[i][t_idx] = d.u[i][l - 1];
                }
            }
            for j in 0..m {
                if let Some(&l) = set.iter().find(|&&l| violates_col(j, l - 1)) {
                    v_sm[j][t_idx] = d.v[l - 1][j];
                }
            }
        }
        let mut s_sm = MaskedMatrix::all_bot(n, m);
        for (pos, &(i, j, _)) in irregular.iter().enumerate() {
            s_sm.set(i, j, Some(cover.assignment[pos] as i64 + 1));
        }
        let v_sm_t: DenseMatrix = (0..r_sm)
            .map(|t| (0..m).map(|j| v_sm[j][t]).collect())
            .collect();
        RankDecomposition { r: r_sm, u: u_sm, v: v_sm_t, s: s_sm }
    };

    Ok(Regularized {
        row: row_part,
        col: col_part,
        small: RegularPart { matrix: small_matrix, decomp: small_decomp },
        big_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::is_partition;

    #[test]
    fn verify_size_mode_example() {
        // A=[[1,2],[3,4]], U all-zero 2×2, V=A, S[i,j]=i (1-based).
        let a = MaskedMatrix::from_dense(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let d = RankDecomposition {
            r: 2,
            u: vec![vec![0, 0], vec![0, 0]],
            v: vec![vec![1, 2], vec![3, 4]],
            s: MaskedMatrix::from_dense(vec![vec![1, 1], vec![2, 2]]).unwrap(),
        };
        assert!(verify_decomposition(&a, &d).unwrap());
    }

    #[test]
    fn verify_universe_mode_example() {
        // A=[[2,1]] over {1,2}: U=[[0,0]], V[k,j]=k, S=[[2,1]].
        let a = MaskedMatrix::from_dense(vec![vec![2, 1]]).unwrap();
        let d = RankDecomposition {
            r: 2,
            u: vec![vec![0, 0]],
            v: vec![vec![1, 1], vec![2, 2]],
            s: MaskedMatrix::from_dense(vec![vec![2, 1]]).unwrap(),
        };
        assert!(verify_decomposition(&a, &d).unwrap());
    }

    #[test]
    fn perturbed_u_fails_verification() {
        let a = MaskedMatrix::from_dense(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let mut d = trivial_decomposition(&a, TrivialMode::Size).unwrap();
        assert!(verify_decomposition(&a, &d).unwrap());
        d.u[0][0] += 1;
        assert!(!verify_decomposition(&a, &d).unwrap());
    }

    #[test]
    fn trivial_size_and_universe() {
        let a = MaskedMatrix::from_dense(vec![
            vec![1, 2, 3, 4, 1],
            vec![2, 2, 4, 4, 1],
            vec![3, 1, 1, 2, 3],
        ])
        .unwrap();
        let d = trivial_decomposition(&a, TrivialMode::Size).unwrap();
        assert_eq!(d.r, 3);
        assert!(verify_decomposition(&a, &d).unwrap());
        let d = trivial_decomposition(&a, TrivialMode::Universe(4)).unwrap();
        assert_eq!(d.r, 4);
        assert!(verify_decomposition(&a, &d).unwrap());
    }

    #[test]
    fn trivial_all_bot_is_rank_zero() {
        let a = MaskedMatrix::all_bot(2, 3);
        let d = trivial_decomposition(&a, TrivialMode::Size).unwrap();
        assert_eq!(d.r, 0);
        assert!(verify_decomposition(&a, &d).unwrap());
    }

    #[test]
    fn universe_mode_domain_error() {
        let a = MaskedMatrix::from_dense(vec![vec![0]]).unwrap();
        assert!(trivial_decomposition(&a, TrivialMode::Universe(2)).is_err());
    }

    #[test]
    fn sum_of_rank_ones() {
        let a1 = MaskedMatrix::constant(2, 2, 5);
        let a2 = MaskedMatrix::constant(2, 2, -1);
        let d1 = trivial_decomposition(&a1, TrivialMode::Universe(5)).unwrap();
        let d2 = RankDecomposition {
            r: 1,
            u: vec![vec![-1], vec![-1]],
            v: vec![vec![0, 0]],
            s: MaskedMatrix::from_dense(vec![vec![1, 1], vec![1, 1]]).unwrap(),
        };
        assert!(verify_decomposition(&a2, &d2).unwrap());
        let sum = sum_decomposition(&d2, &d2).unwrap();
        assert_eq!(sum.r, 1);
        let target = masked_sum(&a2, &a2).unwrap();
        assert!(verify_decomposition(&target, &sum).unwrap());
        let _ = d1;
    }

    #[test]
    fn cover_single_item() {
        let inst = CoverInstance::new(1, vec![1], vec![vec![]]).unwrap();
        let cover = conflict_free_cover(&inst).unwrap();
        assert!(verify_cover(&inst, &cover));
        assert_eq!(cover.sets, vec![vec![1]]);
    }

    #[test]
    fn cover_three_items() {
        // n=3, r=4, s=1, items (1,{2}), (2,{1}), (3,{}).
        let inst =
            CoverInstance::new(4, vec![1, 2, 3], vec![vec![2], vec![1], vec![]]).unwrap();
        let cover = conflict_free_cover(&inst).unwrap();
        assert!(verify_cover(&inst, &cover));
        assert!(cover.sets.len() <= Cover::size_bound(3, 1));
    }

    #[test]
    fn cover_is_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let r = rng.gen_range(4..64);
            let n = rng.gen_range(1..80);
            let s = rng.gen_range(1..5usize);
            let mut items = Vec::new();
            let mut conflicts = Vec::new();
            for _ in 0..n {
                let x = rng.gen_range(1..=r);
                let mut c: Vec<usize> = (0..s)
                    .map(|_| rng.gen_range(1..=r))
                    .filter(|&y| y != x)
                    .collect();
                c.sort_unstable();
                c.dedup();
                items.push(x);
                conflicts.push(c);
            }
            let inst = CoverInstance::new(r, items, conflicts).unwrap();
            let c1 = conflict_free_cover(&inst).unwrap();
            let c2 = conflict_free_cover(&inst).unwrap();
            assert!(verify_cover(&inst, &c1));
            assert_eq!(c1, c2);
            assert!(c1.sets.len() <= Cover::size_bound(inst.len(), inst.s));
        }
    }

    #[test]
    fn regularize_small_rank_shortcut() {
        let a = MaskedMatrix::from_dense(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let d = trivial_decomposition(&a, TrivialMode::Size).unwrap();
        let reg = regularize_decomposition(&a, &d).unwrap();
        assert_eq!(reg.row.matrix, a);
        assert!(reg.col.matrix.is_all_bot());
        assert!(reg.small.matrix.is_all_bot());
        assert_eq!(reg.small.decomp.r, 0);
    }

    #[test]
    fn regularize_routes_filled_selector_to_small_part() {
        // Regularity violations need r > R, so the selector space is much
        // larger than the matrix: one selector value fills its entire row
        // and column and must land in A_sm.
        use rand::{Rng, SeedableRng};
        let (n, m) = (16, 16);
        let big_r = regularity_factor(n, m) as usize;
        let r = 2 * big_r;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let u: DenseMatrix = (0..n).map(|_| (0..r).map(|_| rng.gen_range(-5..5)).collect()).collect();
        let v: DenseMatrix = (0..r).map(|_| (0..m).map(|_| rng.gen_range(-5..5)).collect()).collect();
        let mut s = MaskedMatrix::all_bot(n, m);
        // Row 0 and column 0 entirely select ℓ = 1; the rest is scattered.
        for j in 0..m {
            s.set(0, j, Some(1));
        }
        for i in 0..n {
            s.set(i, 0, Some(1));
        }
        for i in 1..n {
            for j in 1..m {
                s.set(i, j, Some(rng.gen_range(2..=r as i64)));
            }
        }
        let mut a = MaskedMatrix::all_bot(n, m);
        for (i, j, sel) in s.iter_present() {
            let k = (sel - 1) as usize;
            a.set(i, j, Some(u[i][k] + v[k][j]));
        }
        let d = RankDecomposition { r, u, v, s };
        assert!(verify_decomposition(&a, &d).unwrap());
        let reg = regularize_decomposition(&a, &d).unwrap();
        // The (0, 0) entry violates both row- and column-regularity for its
        // selector, so it lands in the small part.
        assert!(reg.small.matrix.get(0, 0).is_some());
        assert!(is_partition(&a, &[&reg.row.matrix, &reg.col.matrix, &reg.small.matrix]));
        assert!(verify_decomposition(&reg.row.matrix, &reg.row.decomp).unwrap());
        assert!(verify_decomposition(&reg.col.matrix, &reg.col.decomp).unwrap());
        assert!(verify_decomposition(&reg.small.matrix, &reg.small.decomp).unwrap());
        assert!(reg.small.decomp.r <= r.div_ceil(2));
        let report = RegularityReport::new(&reg.row.decomp);
        assert!(report.is_row_regular(reg.big_r, m));
        let report = RegularityReport::new(&reg.col.decomp);
        assert!(report.is_col_regular(reg.big_r, n));
    }
}
