//! Finite atomic measure spaces, partitions, and the basic `L^p` machinery
//! the rest of the crate builds on.
//!
//! A space is a finite list of named atoms with nonnegative weights. A
//! σ-algebra on such a space is the same thing as a partition of the atom
//! set; refinement of partitions corresponds to inclusion of σ-algebras.
//! Functions are dense value vectors indexed by atom.
//!
//! Numerical conventions, used consistently across the crate:
//!
//! * **essential sups**: atoms of weight zero never contribute to a sup norm;
//! * **support tolerance**: `|f(a)| <= SUPPORT_TOL * (1 + max|f|)` counts as
//!   zero when deciding supports;
//! * **measurability tolerance**: [`is_measurable`] asks for constancy on
//!   each block within `MEASURABILITY_TOL * (1 + max|f|)` (an exact variant
//!   with caller-chosen tolerance exists);
//! * **canonical partitions**: blocks are sorted internally and ordered by
//!   least atom, so structural equality is partition equality.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A set of atoms, by index into the owning space.
pub type AtomSet = BTreeSet<usize>;

/// Relative tolerance under which a value counts as zero in support decisions.
pub const SUPPORT_TOL: f64 = 1e-14;

/// Default relative tolerance for "constant on each block" checks.
pub const MEASURABILITY_TOL: f64 = 1e-12;

/// A finite measure space: named atoms with nonnegative finite weights, at
/// least one of them positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasureSpace {
    ids: Vec<String>,
    weights: Vec<f64>,
}

impl FiniteMeasureSpace {
    /// Builds a space from atom ids and weights.
    ///
    /// Requires nonempty, equal-length inputs, unique ids, finite
    /// nonnegative weights, and at least one positive weight.
    pub fn new<S: Into<String>>(ids: Vec<S>, weights: Vec<f64>) -> Result<Self> {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        if ids.is_empty() {
            return Err(Error::InvalidInput(
                "a measure space needs at least one atom".into(),
            ));
        }
        if ids.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} atom ids but {} weights",
                ids.len(),
                weights.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate atom id '{id}'")));
            }
        }
        for (id, &w) in ids.iter().zip(&weights) {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "atom '{id}' has weight {w}; weights must be finite and nonnegative"
                )));
            }
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidInput(
                "all atom weights are zero; the space would be trivial".into(),
            ));
        }
        Ok(Self { ids, weights })
    }

    /// Space with unnamed atoms `a0..a{n-1}` and the given weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let ids = (0..weights.len()).map(|i| format!("a{i}")).collect();
        Self::new::<String>(ids, weights)
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Always false (a space has at least one atom); present for symmetry.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of atom `i`.
    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    /// Index of the atom with the given id, if any.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    /// Weight of atom `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// All weights, in atom order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// All ids, in atom order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Total mass of the space.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when atom `i` carries no mass.
    pub fn is_null_atom(&self, i: usize) -> bool {
        self.weights[i] == 0.0
    }

    /// Indices of the atoms with positive mass, in order.
    pub fn positive_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.is_null_atom(i))
    }

    /// Mass of a set of atoms.
    pub fn mass_of(&self, set: &AtomSet) -> f64 {
        set.iter().map(|&a| self.weights[a]).sum()
    }
}

/// A real-valued function on the atoms of a space, stored densely.
///
/// Values are always finite; the constructors reject NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasFn {
    values: Vec<f64>,
}

impl MeasFn {
    /// Wraps a value vector, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "function value at atom index {i} is {v}; values must be finite"
                )));
            }
        }
        Ok(Self { values })
    }

    /// The zero function on `len` atoms.
    pub fn zero(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    /// The constant function `c` on `len` atoms.
    pub fn constant(c: f64, len: usize) -> Result<Self> {
        Self::new(vec![c; len])
    }

    /// Indicator of a set of atoms.
    pub fn indicator(set: &AtomSet, len: usize) -> Self {
        let mut values = vec![0.0; len];
        for &a in set {
            values[a] = 1.0;
        }
        Self { values }
    }

    /// Number of atoms the function is defined on.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when defined on zero atoms.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at atom `i`.
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// All values, in atom order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute value over all atoms (zero-weight atoms included).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise sum.
    pub fn add(&self, other: &MeasFn) -> MeasFn {
        assert_eq!(self.len(), other.len(), "length mismatch in MeasFn::add");
        MeasFn {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Pointwise difference.
    pub fn sub(&self, other: &MeasFn) -> MeasFn {
        assert_eq!(self.len(), other.len(), "length mismatch in MeasFn::sub");
        MeasFn {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &MeasFn) -> MeasFn {
        assert_eq!(self.len(), other.len(), "length mismatch in MeasFn::mul");
        MeasFn {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Scalar multiple.
    pub fn scale(&self, c: f64) -> MeasFn {
        MeasFn {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Pointwise `|f|^p`.
    pub fn abs_powf(&self, p: f64) -> MeasFn {
        MeasFn {
            values: self.values.iter().map(|v| v.abs().powf(p)).collect(),
        }
    }

    /// Restriction-by-indicator: zero outside `set`.
    pub fn restrict(&self, set: &AtomSet) -> MeasFn {
        let mut values = vec![0.0; self.len()];
        for &a in set {
            values[a] = self.values[a];
        }
        MeasFn { values }
    }

    /// Builds a function from per-atom closure output, checking finiteness.
    pub fn from_fn(len: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..len).map(f).collect())
    }
}

/// Largest relative pointwise deviation between two functions, measured as
/// `|a - b| / (1 + max(|a|, |b|))`.
pub fn rel_dev(a: &MeasFn, b: &MeasFn) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch in rel_dev");
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

/// `Σ_a μ(a) |f(a)|^p` for finite `p >= 1`, summed in atom order.
///
/// Null atoms are skipped outright (not multiplied by zero), so values
/// whose `p`-th power would overflow still contribute nothing there.
/// Exposed separately from [`lp_norm`] so callers can compare norms at the
/// p-th-power level with a reproducible summation order.
pub fn lp_power_sum(f: &MeasFn, p: f64, space: &FiniteMeasureSpace) -> Result<f64> {
    assert_eq!(f.len(), space.len(), "function/space length mismatch");
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "exponent p = {p}; this crate handles finite p >= 1"
        )));
    }
    Ok(f.values()
        .iter()
        .zip(space.weights())
        .map(|(v, &w)| if w == 0.0 { 0.0 } else { w * v.abs().powf(p) })
        .sum())
}

/// `(Σ_a μ(a) |f(a)|^p)^(1/p)` for finite `p >= 1`.
pub fn lp_norm(f: &MeasFn, p: f64, space: &FiniteMeasureSpace) -> Result<f64> {
    Ok(lp_power_sum(f, p, space)?.powf(1.0 / p))
}

/// Essential sup of `|f|` over a set of atoms: zero-weight atoms are
/// ignored, and an empty or all-null set has sup `0`.
pub fn sup_norm_on(f: &MeasFn, set: &AtomSet, space: &FiniteMeasureSpace) -> Result<f64> {
    assert_eq!(f.len(), space.len(), "function/space length mismatch");
    let mut sup = 0.0f64;
    for &a in set {
        if a >= space.len() {
            return Err(Error::InvalidInput(format!(
                "atom index {a} out of range (space has {} atoms)",
                space.len()
            )));
        }
        if !space.is_null_atom(a) {
            sup = sup.max(f.get(a).abs());
        }
    }
    Ok(sup)
}

/// Atoms where `|f|` exceeds the support tolerance.
///
/// This is a structural notion (weights are not consulted); comparisons
/// against supports elsewhere in the crate restrict to positive atoms.
pub fn support(f: &MeasFn) -> AtomSet {
    let tol = SUPPORT_TOL * (1.0 + f.max_abs());
    (0..f.len()).filter(|&a| f.get(a).abs() > tol).collect()
}

/// `Σ_{a ∈ set} μ(a) f(a)`.
pub fn integrate(f: &MeasFn, set: &AtomSet, space: &FiniteMeasureSpace) -> Result<f64> {
    assert_eq!(f.len(), space.len(), "function/space length mismatch");
    let mut sum = 0.0;
    for &a in set {
        if a >= space.len() {
            return Err(Error::InvalidInput(format!(
                "atom index {a} out of range (space has {} atoms)",
                space.len()
            )));
        }
        sum += space.weight(a) * f.get(a);
    }
    Ok(sum)
}

/// A partition of the atom set, i.e. a σ-algebra on the space.
///
/// Kept canonical: every block is sorted and blocks are ordered by their
/// least atom, so derived `PartialEq` is partition equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    atom_count: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    /// Builds a partition from blocks, which must disjointly cover
    /// `0..atom_count`.
    pub fn new(atom_count: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; atom_count];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidInput("empty partition block".into()));
            }
            for &a in block {
                if a >= atom_count {
                    return Err(Error::InvalidInput(format!(
                        "block atom index {a} out of range (space has {atom_count} atoms)"
                    )));
                }
                if block_of[a] != usize::MAX {
                    return Err(Error::InvalidInput(format!(
                        "atom index {a} appears in two blocks"
                    )));
                }
                block_of[a] = b;
            }
        }
        if let Some(a) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidInput(format!(
                "atom index {a} is not covered by any block"
            )));
        }
        Ok(Self::canonicalize(atom_count, blocks))
    }

    fn canonicalize(atom_count: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for block in &mut blocks {
            block.sort_unstable();
        }
        blocks.sort_by_key(|b| b[0]);
        let mut block_of = vec![0usize; atom_count];
        for (b, block) in blocks.iter().enumerate() {
            for &a in block {
                block_of[a] = b;
            }
        }
        Self {
            atom_count,
            blocks,
            block_of,
        }
    }

    /// Partition from per-atom labels: atoms share a block iff they share a
    /// label. Labels are otherwise arbitrary.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut first_seen: Vec<(usize, usize)> = Vec::new(); // (label, block index)
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (a, &l) in labels.iter().enumerate() {
            match first_seen.iter().find(|(lab, _)| *lab == l) {
                Some(&(_, b)) => blocks[b].push(a),
                None => {
                    first_seen.push((l, blocks.len()));
                    blocks.push(vec![a]);
                }
            }
        }
        Self::canonicalize(labels.len(), blocks)
    }

    /// The discrete partition (every atom its own block).
    pub fn discrete(atom_count: usize) -> Self {
        Self::canonicalize(atom_count, (0..atom_count).map(|a| vec![a]).collect())
    }

    /// The trivial partition (one block).
    pub fn trivial(atom_count: usize) -> Self {
        assert!(atom_count > 0, "trivial partition of an empty atom set");
        Self::canonicalize(atom_count, vec![(0..atom_count).collect()])
    }

    /// Number of atoms partitioned.
    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    /// Number of blocks.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// All blocks, canonical order.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Atoms of block `b`.
    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    /// Index of the block containing atom `a`.
    pub fn block_of(&self, a: usize) -> usize {
        self.block_of[a]
    }

    /// Mass of block `b` under the given space.
    pub fn block_mass(&self, b: usize, space: &FiniteMeasureSpace) -> f64 {
        assert_eq!(self.atom_count, space.len(), "partition/space mismatch");
        self.blocks[b].iter().map(|&a| space.weight(a)).sum()
    }

    /// True when block `b` carries no mass.
    pub fn is_null_block(&self, b: usize, space: &FiniteMeasureSpace) -> bool {
        self.block_mass(b, space) == 0.0
    }
}

/// True iff `f` is constant on every block of `a` within the default
/// relative tolerance. The check is structural: zero-weight atoms count.
pub fn is_measurable(f: &MeasFn, a: &Partition) -> bool {
    let tol = MEASURABILITY_TOL * (1.0 + f.max_abs());
    is_measurable_with_tol(f, a, tol)
}

/// [`is_measurable`] with an explicit absolute tolerance (`0.0` for exact).
pub fn is_measurable_with_tol(f: &MeasFn, a: &Partition, tol: f64) -> bool {
    assert_eq!(f.len(), a.atom_count(), "function/partition length mismatch");
    for block in a.blocks() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &atom in block {
            lo = lo.min(f.get(atom));
            hi = hi.max(f.get(atom));
        }
        if hi - lo > tol {
            return false;
        }
    }
    true
}

/// True iff σ(b) ⊆ σ(a), i.e. `b` is coarser than (or equal to) `a`:
/// every block of `a` lies inside a block of `b`.
pub fn is_coarser(b: &Partition, a: &Partition) -> bool {
    assert_eq!(
        a.atom_count(),
        b.atom_count(),
        "partitions over different atom sets"
    );
    a.blocks().iter().all(|block| {
        let target = b.block_of(block[0]);
        block.iter().all(|&atom| b.block_of(atom) == target)
    })
}

/// Finest partition coarser than both arguments (the σ-algebra
/// intersection): connected components of the block-overlap graph.
pub fn meet(a: &Partition, b: &Partition) -> Partition {
    assert_eq!(
        a.atom_count(),
        b.atom_count(),
        "partitions over different atom sets"
    );
    let n = a.atom_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    let union = |parent: &mut Vec<usize>, x: usize, y: usize| {
        let rx = find(parent, x);
        let ry = find(parent, y);
        if rx != ry {
            parent[rx.max(ry)] = rx.min(ry);
        }
    };
    for part in [a, b] {
        for block in part.blocks() {
            for w in block.windows(2) {
                union(&mut parent, w[0], w[1]);
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|x| find(&mut parent, x)).collect();
    Partition::from_labels(&labels)
}

/// Enumerates the measurable simple functions with values drawn from a
/// grid and support contained in at most `support_bound` blocks.
///
/// The grid is sorted and deduplicated first. Order is deterministic:
/// lexicographic in block order with grid values ascending, the earliest
/// block varying slowest. The exact output size is computed up front and
/// the call refuses (`CapExceeded`) when it would exceed `cap`. Note the
/// zero function is only producible when the grid contains `0`.
pub fn simple_net(
    a: &Partition,
    value_grid: &[f64],
    support_bound: usize,
    cap: u128,
) -> Result<Vec<MeasFn>> {
    let all: Vec<usize> = (0..a.block_count()).collect();
    simple_net_on_blocks(a, &all, value_grid, support_bound, cap)
}

/// [`simple_net`] restricted to functions vanishing outside the listed
/// blocks. Used to keep nets tractable on large spaces.
pub fn simple_net_on_blocks(
    a: &Partition,
    blocks: &[usize],
    value_grid: &[f64],
    support_bound: usize,
    cap: u128,
) -> Result<Vec<MeasFn>> {
    let mut grid: Vec<f64> = Vec::new();
    for &v in value_grid {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid value {v}; grid values must be finite"
            )));
        }
        if !grid.iter().any(|&g| g == v) {
            grid.push(v);
        }
    }
    grid.sort_by(|x, y| x.partial_cmp(y).expect("finite grid values"));
    for &b in blocks {
        if b >= a.block_count() {
            return Err(Error::InvalidInput(format!(
                "block index {b} out of range (partition has {} blocks)",
                a.block_count()
            )));
        }
    }

    let has_zero = grid.iter().any(|&g| g == 0.0);
    let nonzero = grid.iter().filter(|&&g| g != 0.0).count() as u128;
    let count = net_size(blocks.len(), nonzero, has_zero, support_bound);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }

    let mut out = Vec::with_capacity(count as usize);
    let mut assignment = vec![0.0f64; blocks.len()];
    enumerate_net(
        a,
        blocks,
        &grid,
        support_bound,
        0,
        0,
        &mut assignment,
        &mut out,
    );
    Ok(out)
}

/// Number of functions [`simple_net`] would produce.
fn net_size(block_count: usize, nonzero_values: u128, has_zero: bool, bound: usize) -> u128 {
    if !has_zero {
        // every block takes a nonzero value, so the support is all blocks
        return if block_count <= bound {
            nonzero_values.pow(block_count as u32)
        } else {
            0
        };
    }
    let mut total: u128 = 0;
    let mut binom: u128 = 1; // C(block_count, j)
    for j in 0..=bound.min(block_count) {
        total += binom * nonzero_values.pow(j as u32);
        binom = binom * (block_count - j) as u128 / (j + 1) as u128;
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn enumerate_net(
    a: &Partition,
    blocks: &[usize],
    grid: &[f64],
    bound: usize,
    pos: usize,
    used: usize,
    assignment: &mut [f64],
    out: &mut Vec<MeasFn>,
) {
    if pos == blocks.len() {
        let mut values = vec![0.0; a.atom_count()];
        for (slot, &b) in blocks.iter().enumerate() {
            for &atom in a.block(b) {
                values[atom] = assignment[slot];
            }
        }
        out.push(MeasFn { values });
        return;
    }
    for &v in grid {
        let next_used = used + usize::from(v != 0.0);
        if next_used > bound {
            continue;
        }
        assignment[pos] = v;
        enumerate_net(a, blocks, grid, bound, pos + 1, next_used, assignment, out);
    }
}
