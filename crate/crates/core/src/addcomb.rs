//! Additive-combinatorics toolkit: sumsets with multiplicities, doubling,
//! popular sums, the popular-sum decomposition, greedy covering, a heuristic
//! BSG covering, and sum-order-preserving hashing at exhaustive scale.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite sorted set of integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegerSet {
    elements: Vec<i64>,
}

impl IntegerSet {
    pub fn new(mut elements: Vec<i64>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        IntegerSet { elements }
    }

    pub fn empty() -> Self {
        IntegerSet { elements: Vec::new() }
    }

    pub fn singleton(x: i64) -> Self {
        IntegerSet { elements: vec![x] }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.elements.iter().copied()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.elements
    }

    pub fn shift(&self, by: i64) -> IntegerSet {
        IntegerSet { elements: self.elements.iter().map(|x| x + by).collect() }
    }

    pub fn negate(&self) -> IntegerSet {
        IntegerSet::new(self.elements.iter().map(|x| -x).collect())
    }

    pub fn union(&self, other: &IntegerSet) -> IntegerSet {
        let mut v = self.elements.clone();
        v.extend_from_slice(&other.elements);
        IntegerSet::new(v)
    }

    pub fn intersect(&self, other: &IntegerSet) -> IntegerSet {
        IntegerSet {
            elements: self.elements.iter().copied().filter(|&x| other.contains(x)).collect(),
        }
    }

    pub fn minus(&self, other: &IntegerSet) -> IntegerSet {
        IntegerSet {
            elements: self.elements.iter().copied().filter(|&x| !other.contains(x)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &IntegerSet) -> bool {
        self.elements.iter().all(|&x| other.contains(x))
    }
}

impl FromIterator<i64> for IntegerSet {
    fn from_iter<T: IntoIterator<Item = i64>>(iter: T) -> Self {
        IntegerSet::new(iter.into_iter().collect())
    }
}

/// The sumset `X + Y` with exact multiplicities `r_{X+Y}(z)`.
pub fn sumset_with_multiplicities(x: &IntegerSet, y: &IntegerSet) -> BTreeMap<i64, u64> {
    let mut table = BTreeMap::new();
    for a in x.iter() {
        for b in y.iter() {
            *table.entry(a + b).or_insert(0) += 1;
        }
    }
    table
}

/// The sumset `X + Y` as a set.
pub fn sumset(x: &IntegerSet, y: &IntegerSet) -> IntegerSet {
    let mut v = Vec::with_capacity(x.len() * y.len());
    for a in x.iter() {
        for b in y.iter() {
            v.push(a + b);
        }
    }
    IntegerSet::new(v)
}

/// The difference set `X - Y`.
pub fn difference_set(x: &IntegerSet, y: &IntegerSet) -> IntegerSet {
    sumset(x, &y.negate())
}

/// The n-fold iterated sumset `nX` (with `0X = {0}`).
pub fn iterated_sumset(x: &IntegerSet, n: u32) -> IntegerSet {
    let mut acc = IntegerSet::singleton(0);
    for _ in 0..n {
        acc = sumset(&acc, x);
    }
    acc
}

/// The set of `s`-popular sums `P_s(X, Y) = {z : r_{X+Y}(z) ≥ s}`.
pub fn popular_sums(x: &IntegerSet, y: &IntegerSet, s: u64) -> Result<IntegerSet> {
    if s < 1 {
        return Err(Error::domain("popularity threshold must be at least 1"));
    }
    Ok(IntegerSet::new(
        sumset_with_multiplicities(x, y)
            .into_iter()
            .filter(|&(_, count)| count >= s)
            .map(|(z, _)| z)
            .collect(),
    ))
}

/// Exact doubling constant `|X + X| / |X|` as a reduced rational.
pub fn doubling_constant(x: &IntegerSet) -> Result<Ratio<i64>> {
    if x.is_empty() {
        return Err(Error::domain("doubling of the empty set is undefined"));
    }
    let ss = sumset(x, x);
    Ok(Ratio::new(ss.len() as i64, x.len() as i64))
}

/// A popular-sum decomposition of set families `X_1..X_n` and `Y_1..Y_m`.
///
/// Each `X_i` is partitioned into parts `X_{i,g} ⊆ S_g + s_{i,g}` plus a
/// remainder `X_i*`; symmetrically for `Y`. Part `g` of item `i` is
/// `x_parts[i][g]`; empty parts are kept so indices line up with `x_sets`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopularSumDecomposition {
    pub p: u64,
    pub d: u64,
    /// Pattern sets `S_g`, one per executed iteration (≤ p²).
    pub x_sets: Vec<IntegerSet>,
    /// Shifts `s_{i,g}`.
    pub x_shifts: Vec<Vec<i64>>,
    /// Parts `X_{i,g}`.
    pub x_parts: Vec<Vec<IntegerSet>>,
    /// Remainders `X_i*`.
    pub x_rest: Vec<IntegerSet>,
    pub y_sets: Vec<IntegerSet>,
    pub y_shifts: Vec<Vec<i64>>,
    pub y_parts: Vec<Vec<IntegerSet>>,
    pub y_rest: Vec<IntegerSet>,
}

/// Popularity threshold used by the decomposition: `⌈2d/p⌉` as an integer
/// count (a multiplicity `r ≥ 2d/p` iff `r ≥ ⌈2d/p⌉`).
pub fn decomposition_threshold(d: u64, p: u64) -> u64 {
    ((2 * d + p - 1) / p).max(1)
}

/// One side of the decomposition: partitions the `targets` against the
/// `references`, returning `(sets, shifts, parts, rest)`.
fn decompose_side(
    targets: &[IntegerSet],
    references: &[IntegerSet],
    d: u64,
    p: u64,
) -> Result<(Vec<IntegerSet>, Vec<Vec<i64>>, Vec<Vec<IntegerSet>>, Vec<IntegerSet>)> {
    let n = targets.len();
    let m = references.len();
    let threshold = decomposition_threshold(d, p);
    let stop_at = (n as u64) * (m as u64) / p; // "≤ nm/p" stopping rule

    let mut current: Vec<IntegerSet> = targets.to_vec();
    let mut sets: Vec<IntegerSet> = Vec::new();
    let mut shifts: Vec<Vec<i64>> = vec![Vec::new(); n];
    let mut parts: Vec<Vec<IntegerSet>> = vec![Vec::new(); n];

    for _round in 0..p * p {
        // Exact popular sums of all pairs (current X_i, Y_j).
        let mut popular: Vec<Vec<IntegerSet>> = Vec::with_capacity(n);
        for xi in &current {
            let row: Vec<IntegerSet> = references
                .iter()
                .map(|yj| popular_sums(xi, yj, threshold))
                .collect::<Result<_>>()?;
            popular.push(row);
        }
        let nonempty =
            popular.iter().flatten().filter(|set| !set.is_empty()).count() as u64;
        if nonempty <= stop_at {
            // Remainders are the current sets.
            return Ok((sets, shifts, parts, current));
        }
        // Pick a reference j with at least n/p nonempty popular sets.
        let j = (0..m)
            .find(|&j| {
                let hits = (0..n).filter(|&i| !popular[i][j].is_empty()).count() as u64;
                hits * p >= n as u64
            })
            .ok_or_else(|| {
                Error::NonTermination(
                    "popular-sum decomposition: no dense reference found".into(),
                )
            })?;
        let pattern = references[j].negate(); // S_g = -Y_j
        for i in 0..n {
            if popular[i][j].is_empty() {
                // Bad index: empty part, arbitrary shift.
                shifts[i].push(0);
                parts[i].push(IntegerSet::empty());
            } else {
                let shift = popular[i][j].as_slice()[0];
                let covered = current[i].intersect(&pattern.shift(shift));
                current[i] = current[i].minus(&covered);
                shifts[i].push(shift);
                parts[i].push(covered);
            }
        }
        sets.push(pattern);
    }
    // p² rounds always suffice; reaching this point with work left would
    // violate the termination argument.
    let mut popular_left = 0u64;
    for xi in &current {
        for yj in references {
            if !popular_sums(xi, yj, threshold)?.is_empty() {
                popular_left += 1;
            }
        }
    }
    if popular_left <= stop_at {
        return Ok((sets, shifts, parts, current));
    }
    Err(Error::NonTermination(
        "popular-sum decomposition did not finish within p² iterations".into(),
    ))
}

/// Computes the popular-sum decomposition of `X_1..X_n` against `Y_1..Y_m`
/// with size bound `d` and parameter `p ≥ 1`. Popular sums are computed
/// exactly throughout.
pub fn popular_sum_decomposition(
    xs: &[IntegerSet],
    ys: &[IntegerSet],
    d: u64,
    p: u64,
) -> Result<PopularSumDecomposition> {
    if p < 1 {
        return Err(Error::domain("parameter p must be at least 1"));
    }
    for (label, family) in [("X", xs), ("Y", ys)] {
        for (i, set) in family.iter().enumerate() {
            if set.len() as u64 > d {
                return Err(Error::domain(format!(
                    "{label}_{i} has {} elements, above the bound d = {d}",
                    set.len()
                )));
            }
        }
    }
    let (x_sets, x_shifts, x_parts, x_rest) = decompose_side(xs, ys, d, p)?;
    let (y_sets, y_shifts, y_parts, y_rest) = decompose_side(ys, xs, d, p)?;
    Ok(PopularSumDecomposition {
        p,
        d,
        x_sets,
        x_shifts,
        x_parts,
        x_rest,
        y_sets,
        y_shifts,
        y_parts,
        y_rest,
    })
}

impl PopularSumDecomposition {
    /// Re-verifies both decomposition properties from scratch against the original
    /// families.
    pub fn verify(&self, xs: &[IntegerSet], ys: &[IntegerSet]) -> Result<bool> {
        let threshold = decomposition_threshold(self.d, self.p);
        let check_side = |targets: &[IntegerSet],
                          references: &[IntegerSet],
                          sets: &Vec<IntegerSet>,
                          shifts: &Vec<Vec<i64>>,
                          parts: &Vec<Vec<IntegerSet>>,
                          rest: &Vec<IntegerSet>|
         -> Result<bool> {
            if sets.len() as u64 > self.p * self.p {
                return Ok(false);
            }
            for (i, target) in targets.iter().enumerate() {
                // Partition: parts plus remainder are disjoint and exhaust.
                let mut seen = rest[i].clone();
                let mut total = rest[i].len();
                for part in &parts[i] {
                    total += part.len();
                    seen = seen.union(part);
                }
                if total != target.len() || seen != *target {
                    return Ok(false);
                }
                // Containment and size constraints.
                for (g, part) in parts[i].iter().enumerate() {
                    if part.len() as u64 > self.d {
                        return Ok(false);
                    }
                    if !part.is_subset_of(&sets[g].shift(shifts[i][g])) {
                        return Ok(false);
                    }
                }
            }
            for set in sets {
                if set.len() as u64 > self.d {
                    return Ok(false);
                }
            }
            // Property 2: few pairs with a popular sum against the rest.
            let mut hits = 0u64;
            for rest_i in rest {
                for reference in references {
                    if !popular_sums(rest_i, reference, threshold)?.is_empty() {
                        hits += 1;
                    }
                }
            }
            Ok(hits <= (targets.len() as u64) * (references.len() as u64) / self.p)
        };
        Ok(check_side(xs, ys, &self.x_sets, &self.x_shifts, &self.x_parts, &self.x_rest)?
            && check_side(ys, xs, &self.y_sets, &self.y_shifts, &self.y_parts, &self.y_rest)?)
    }
}

/// Greedy covering: returns a shift set `S` with `X ⊆ Y + S`, iteratively
/// picking the shift of maximum multiplicity in `Y - X_remaining` (ties
/// broken toward the smallest shift) and removing the covered elements.
pub fn greedy_cover(x: &IntegerSet, y: &IntegerSet) -> Result<IntegerSet> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("greedy cover requires nonempty sets"));
    }
    let mut remaining = x.clone();
    let mut shifts = Vec::new();
    while !remaining.is_empty() {
        // r_{Y-X}(s) counts pairs with y - x = s, i.e. covering x by y - s
        // ... here we want X ⊆ Y + S, so the shift for x covered by y is
        // s = x - y and the multiplicity table is over X - Y.
        let table = sumset_with_multiplicities(&remaining, &y.negate());
        let (&best, _) = table
            .iter()
            .max_by(|(s1, c1), (s2, c2)| c1.cmp(c2).then(s2.cmp(s1)))
            .expect("nonempty table");
        shifts.push(best);
        remaining = remaining.minus(&y.shift(best));
    }
    Ok(IntegerSet::new(shifts))
}

/// Size bound of the greedy cover: `⌈|Y−X|/|Y| · ln|X|⌉`.
pub fn greedy_cover_bound(x: &IntegerSet, y: &IntegerSet) -> usize {
    let diff = difference_set(y, x).len() as f64;
    (diff / y.len() as f64 * (x.len() as f64).ln()).ceil() as usize
}

/// A rectangle cover in the BSG sense: rectangles `X_ℓ × Y_ℓ` plus the
/// exactly-computed remainder
/// `R = {(x,y) ∈ X×Y : x+y ∈ Z} \ ∪_ℓ (X_ℓ × Y_ℓ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsgCover {
    pub rectangles: Vec<(IntegerSet, IntegerSet)>,
    pub remainder: Vec<(i64, i64)>,
}

/// Heuristic BSG covering. The remainder definition is contractual; the
/// quantitative rectangle bounds of the BSG theorem are best-effort only.
///
/// Greedy construction: repeatedly take the solution-graph vertex of maximum
/// remaining degree, use its neighborhood as `Y_ℓ`, and collect every `x`
/// with a surviving neighbor inside that neighborhood into `X_ℓ`. Rectangles
/// may cover non-solution pairs; only the remainder matters.
pub fn bsg_cover(x: &IntegerSet, y: &IntegerSet, z: &IntegerSet, l: usize) -> BsgCover {
    // Solution pairs, grouped by x.
    let mut neighbors: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for a in x.iter() {
        for b in y.iter() {
            if z.contains(a + b) {
                neighbors.entry(a).or_default().push(b);
            }
        }
    }
    let mut rectangles = Vec::new();
    for _ in 0..l {
        let Some((&pivot, _)) = neighbors
            .iter()
            .filter(|(_, ys)| !ys.is_empty())
            .max_by_key(|(a, ys)| (ys.len(), std::cmp::Reverse(**a)))
        else {
            break;
        };
        let y_rect = IntegerSet::new(neighbors[&pivot].clone());
        if y_rect.is_empty() {
            break;
        }
        let mut x_rect = Vec::new();
        for (&a, ys) in &neighbors {
            if ys.iter().any(|&b| y_rect.contains(b)) {
                x_rect.push(a);
            }
        }
        let x_rect = IntegerSet::new(x_rect);
        // Remove covered pairs from the graph.
        for a in x_rect.iter() {
            if let Some(ys) = neighbors.get_mut(&a) {
                ys.retain(|&b| !y_rect.contains(b));
            }
        }
        rectangles.push((x_rect, y_rect));
    }
    let mut remainder = Vec::new();
    for (&a, ys) in &neighbors {
        for &b in ys {
            remainder.push((a, b));
        }
    }
    BsgCover { rectangles, remainder }
}

/// A function `h : Y → {0, ..., N}` meant to be sum-order-preserving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumOrderHash {
    pub domain: IntegerSet,
    pub values: Vec<i64>,
}

impl SumOrderHash {
    pub fn apply(&self, x: i64) -> Option<i64> {
        self.domain
            .as_slice()
            .binary_search(&x)
            .ok()
            .map(|idx| self.values[idx])
    }
}

/// Checks the defining implication `x1+x2 < y1+y2 ⇒ h(x1)+h(x2) < h(y1)+h(y2)`
/// over all quadruples, by grouping pairs by their sum: all hash pair-sums of
/// a smaller sum class must lie strictly below all of a larger class.
pub fn verify_sum_order_preserving(h: &SumOrderHash) -> bool {
    if h.domain.len() != h.values.len() {
        return false;
    }
    let elems = h.domain.as_slice();
    let mut classes: BTreeMap<i64, (i64, i64)> = BTreeMap::new(); // sum -> (min, max) of hash sums
    for (i, &a) in elems.iter().enumerate() {
        for &b in &elems[i..] {
            let hs = h.apply(a).unwrap() + h.apply(b).unwrap();
            let entry = classes.entry(a + b).or_insert((hs, hs));
            entry.0 = entry.0.min(hs);
            entry.1 = entry.1.max(hs);
        }
    }
    let mut prev_max: Option<i64> = None;
    for (_, (lo, hi)) in classes {
        if let Some(pm) = prev_max {
            if lo <= pm {
                return false;
            }
        }
        prev_max = Some(hi);
    }
    true
}

/// Outcome of [`sum_order_hash_search`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HashSearchOutcome {
    /// A sum-order-preserving hash on the reported subdomain `Y ⊆ X`.
    /// `full` marks whether `Y = X`.
    Found {
        domain: IntegerSet,
        hash: SumOrderHash,
        full: bool,
    },
    /// The search budget ran out before the question was settled; distinct
    /// from a verified negative.
    Budget,
    /// No hash exists for any nonempty subdomain (only for empty input).
    NoneExists,
}

/// Backtracking search for a strictly increasing assignment
/// `h : Y → {0..range}` that is sum-order-preserving. Returns `None` if no
/// assignment exists, or `Err(())`-like budget exhaustion via the counter.
fn backtrack_hash(domain: &[i64], range: i64, budget: &mut u64) -> Option<Vec<i64>> {
    // Sum-order preservation forces h strictly increasing on the sorted
    // domain, so assignments are increasing sequences in {0..range}.
    fn consistent(domain: &[i64], values: &[i64], new_idx: usize) -> bool {
        // Check all quadruple constraints that involve the new element and
        // only assigned elements. Pairs (a, b) with b = new element.
        let k = new_idx;
        for i1 in 0..=k {
            for i2 in i1..=k {
                for j1 in 0..=k {
                    for j2 in j1..=k {
                        let s1 = domain[i1] + domain[i2];
                        let s2 = domain[j1] + domain[j2];
                        let h1 = values[i1] + values[i2];
                        let h2 = values[j1] + values[j2];
                        if s1 < s2 && h1 >= h2 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
    fn recurse(
        domain: &[i64],
        range: i64,
        values: &mut Vec<i64>,
        budget: &mut u64,
    ) -> Option<Option<Vec<i64>>> {
        if values.len() == domain.len() {
            return Some(Some(values.clone()));
        }
        let idx = values.len();
        let lo = values.last().map_or(0, |v| v + 1);
        // Leave room for the remaining elements (strictly increasing).
        let slack = (domain.len() - idx - 1) as i64;
        for v in lo..=(range - slack) {
            if *budget == 0 {
                return None; // budget exhausted
            }
            *budget -= 1;
            values.push(v);
            if consistent(domain, values, idx) {
                match recurse(domain, range, values, budget) {
                    Some(Some(found)) => return Some(Some(found)),
                    Some(None) => {}
                    None => return None,
                }
            }
            values.pop();
        }
        Some(None)
    }
    let mut values = Vec::with_capacity(domain.len());
    recurse(domain, range, &mut values, budget).unwrap_or(None).map(Some).unwrap_or(None)
}

/// Searches for a sum-order-preserving hash `h : Y → {0, ..., |X|}` on the
/// largest subdomain `Y ⊆ X` it can certify, trying `Y = X` first and then
/// subsets in decreasing size (lexicographic within a size). Budget
/// exhaustion is reported as a distinct outcome so negative results stay
/// trustworthy.
pub fn sum_order_hash_search(x: &IntegerSet, budget: u64) -> HashSearchOutcome {
    if x.is_empty() {
        return HashSearchOutcome::NoneExists;
    }
    let range = x.len() as i64;
    let elems = x.as_slice();
    let mut budget_left = budget;

    // Full domain first.
    match try_domain(elems, range, &mut budget_left) {
        TryResult::Found(values) => {
            let hash = SumOrderHash { domain: x.clone(), values };
            debug_assert!(verify_sum_order_preserving(&hash));
            return HashSearchOutcome::Found { domain: x.clone(), hash, full: true };
        }
        TryResult::Budget => return HashSearchOutcome::Budget,
        TryResult::NoHash => {}
    }

    // Subsets in decreasing size; any singleton admits a hash, so the search
    // always terminates with a Found or Budget outcome.
    for size in (1..x.len()).rev() {
        let mut indices: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<i64> = indices.iter().map(|&i| elems[i]).collect();
            match try_domain(&subset, range, &mut budget_left) {
                TryResult::Found(values) => {
                    let domain = IntegerSet::new(subset);
                    let hash = SumOrderHash { domain: domain.clone(), values };
                    debug_assert!(verify_sum_order_preserving(&hash));
                    return HashSearchOutcome::Found { domain, hash, full: false };
                }
                TryResult::Budget => return HashSearchOutcome::Budget,
                TryResult::NoHash => {}
            }
            // Next combination of `size` indices out of x.len().
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if indices[i] != i + x.len() - size {
                    indices[i] += 1;
                    for j in i + 1..size {
                        indices[j] = indices[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    indices.clear();
                    break;
                }
            }
            if indices.is_empty() {
                break;
            }
        }
    }
    HashSearchOutcome::NoneExists
}

enum TryResult {
    Found(Vec<i64>),
    NoHash,
    Budget,
}

fn try_domain(domain: &[i64], range: i64, budget: &mut u64) -> TryResult {
    let before = *budget;
    match backtrack_hash(domain, range, budget) {
        Some(values) => TryResult::Found(values),
        None => {
            if *budget == 0 && before > 0 {
                TryResult::Budget
            } else if before == 0 {
                TryResult::Budget
            } else {
                TryResult::NoHash
            }
        }
    }
}

/// Exhaustive existence oracle: enumerates every strictly increasing map
/// `X → {0..range}` and checks the defining quadruple condition directly.
/// Independent of the backtracking search.
pub fn hash_exists_oracle(x: &IntegerSet, range: i64) -> bool {
    let elems = x.as_slice();
    let k = elems.len();
    if k == 0 {
        return false;
    }
    let mut values: Vec<i64> = (0..k as i64).collect();
    loop {
        let hash = SumOrderHash { domain: x.clone(), values: values.clone() };
        let mut ok = true;
        'outer: for &a in elems {
            for &b in elems {
                for &c in elems {
                    for &d in elems {
                        if a + b < c + d
                            && hash.apply(a).unwrap() + hash.apply(b).unwrap()
                                >= hash.apply(c).unwrap() + hash.apply(d).unwrap()
                        {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if ok {
            return true;
        }
        // Next increasing sequence over {0..range}.
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if values[i] < range - (k - 1 - i) as i64 {
                values[i] += 1;
                for j in i + 1..k {
                    values[j] = values[j - 1] + 1;
                }
                break;
            }
        }
    }
}
