//! Self-maps of the atom set and their measure-theoretic profile:
//! pullback partitions, Radon–Nikodym derivatives of iterated image and
//! preimage measures, periodicity, eventual non-recurrence witnesses, and
//! the limit σ-algebra of the backward iteration.
//!
//! A transformation `φ` pushes the measure around; the density
//! `h_n(b) = μ(φ^{−n}{b}) / μ(b)` on positive atoms is always computed from
//! exact iterated preimage masses, never from floating products of
//! single-step densities — the factored identities are instead *checked*
//! against it by [`rn_chain_check`]. Atoms of zero mass are assigned the
//! density `0` by convention throughout.

use std::collections::HashMap;

use crate::conditional::cond_exp;
use crate::error::{Error, Result};
use crate::measure_space::{AtomSet, FiniteMeasureSpace, MeasFn, Partition};

/// Total self-map of the atom index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformation {
    image: Vec<usize>,
}

impl Transformation {
    /// Builds a transformation from the image index of each atom.
    pub fn new(image: Vec<usize>) -> Result<Self> {
        if image.is_empty() {
            return Err(Error::InvalidInput("transformation on zero atoms".into()));
        }
        let n = image.len();
        if let Some(&bad) = image.iter().find(|&&b| b >= n) {
            return Err(Error::InvalidInput(format!(
                "image index {bad} out of range for {n} atoms"
            )));
        }
        Ok(Self { image })
    }

    /// The identity map on `n` atoms.
    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n).collect(),
        }
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.image.len()
    }

    /// Never true: transformations live on nonempty atom sets.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Image of one atom.
    pub fn apply(&self, a: usize) -> usize {
        self.image[a]
    }

    /// The full image table.
    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &Transformation) -> Transformation {
        assert_eq!(self.len(), inner.len(), "composition size mismatch");
        Transformation {
            image: inner.image.iter().map(|&a| self.image[a]).collect(),
        }
    }

    /// The `n`-fold iterate `φⁿ` (the identity for `n = 0`).
    pub fn iterate(&self, n: usize) -> Transformation {
        let mut out = Transformation::identity(self.len());
        for _ in 0..n {
            out = self.compose(&out);
        }
        out
    }

    /// True when the image table is a bijection.
    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.len()];
        for &b in &self.image {
            if seen[b] {
                return false;
            }
            seen[b] = true;
        }
        true
    }

    /// Cycle lengths of a permutation; `None` when not bijective.
    pub fn cycle_lengths(&self) -> Option<Vec<usize>> {
        if !self.is_permutation() {
            return None;
        }
        let mut visited = vec![false; self.len()];
        let mut lengths = Vec::new();
        for start in 0..self.len() {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !visited[cur] {
                visited[cur] = true;
                len += 1;
                cur = self.image[cur];
            }
            lengths.push(len);
        }
        Some(lengths)
    }

    /// The composition `f ∘ φ` as a function of the source atom.
    pub fn pullback_fn(&self, f: &MeasFn) -> MeasFn {
        assert_eq!(f.len(), self.len(), "function/map length mismatch");
        MeasFn::new(self.image.iter().map(|&b| f.get(b)).collect())
            .expect("pullback of finite values is finite")
    }

    /// Set image `φ(S)`.
    pub fn image_set(&self, s: &AtomSet) -> AtomSet {
        s.iter().map(|&a| self.image[a]).collect()
    }

    /// Set preimage `φ^{−1}(S)`.
    pub fn preimage_set(&self, s: &AtomSet) -> AtomSet {
        (0..self.len()).filter(|a| s.contains(&self.image[*a])).collect()
    }

    /// For each atom, the list of its preimages.
    pub fn preimage_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.len()];
        for (a, &b) in self.image.iter().enumerate() {
            lists[b].push(a);
        }
        lists
    }
}

/// Partition generated by `φ^{−1}` of the blocks of `a`: atoms are grouped
/// by the block their image lands in.
pub fn pullback_partition(phi: &Transformation, a: &Partition) -> Partition {
    assert_eq!(phi.len(), a.atom_count(), "map/partition size mismatch");
    let labels: Vec<usize> = (0..phi.len()).map(|x| a.block_of(phi.apply(x))).collect();
    Partition::from_labels(&labels)
}

/// Nonsingularity verdict together with the (single-step) preimage density.
#[derive(Debug, Clone)]
pub struct Nonsingularity {
    /// True when no zero-mass atom has positive preimage mass, i.e.
    /// `μ∘φ^{−1} ≪ μ`.
    pub nonsingular: bool,
    /// `h(b) = μ(φ^{−1}{b}) / μ(b)` on positive atoms, `0` on null atoms.
    /// Only a density when `nonsingular` holds.
    pub h: MeasFn,
}

/// Checks `μ∘φ^{−1} ≪ μ` and returns the preimage density.
pub fn is_nonsingular(phi: &Transformation, space: &FiniteMeasureSpace) -> Nonsingularity {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    let mass = preimage_mass(phi, space, 1);
    let mut nonsingular = true;
    let mut values = vec![0.0; space.len()];
    for b in 0..space.len() {
        if space.is_null_atom(b) {
            if mass[b] > 0.0 {
                nonsingular = false;
            }
        } else {
            values[b] = mass[b] / space.weight(b);
        }
    }
    Nonsingularity {
        nonsingular,
        h: MeasFn::new(values).expect("mass ratios are finite"),
    }
}

/// `μ(φ^{−n}{b})` for every atom `b`, from the exact iterated preimage.
fn preimage_mass(phi: &Transformation, space: &FiniteMeasureSpace, n: usize) -> Vec<f64> {
    let phi_n = phi.iterate(n);
    let mut mass = vec![0.0; space.len()];
    for a in 0..space.len() {
        mass[phi_n.apply(a)] += space.weight(a);
    }
    mass
}

/// Radon–Nikodym derivative `h_n = dμ∘φ^{−n}/dμ` on positive atoms
/// (`0` on null atoms); errors when `φ` is singular.
pub fn rn_derivative_n(
    phi: &Transformation,
    space: &FiniteMeasureSpace,
    n: usize,
) -> Result<MeasFn> {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    let ns = is_nonsingular(phi, space);
    if !ns.nonsingular {
        return Err(Error::Domain(
            "preimage density undefined: a zero-mass atom carries positive preimage mass".into(),
        ));
    }
    let mass = preimage_mass(phi, space, n);
    let values = (0..space.len())
        .map(|b| {
            if space.is_null_atom(b) {
                0.0
            } else {
                mass[b] / space.weight(b)
            }
        })
        .collect();
    Ok(MeasFn::new(values).expect("mass ratios are finite"))
}

/// Blockwise derivative `dμ∘φ^{−n}|_A / dμ|_A`: on each block `B` of `a`
/// the constant `μ(φ^{−n}(B)) / μ(B)`, `0` on zero-mass blocks.
pub fn rn_derivative_n_on(
    phi: &Transformation,
    space: &FiniteMeasureSpace,
    a: &Partition,
    n: usize,
) -> Result<MeasFn> {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    assert_eq!(a.atom_count(), space.len(), "partition/space mismatch");
    let mass = preimage_mass(phi, space, n);
    let mut values = vec![0.0; space.len()];
    for (b, block) in a.blocks().iter().enumerate() {
        let block_mass = a.block_mass(b, space);
        let pre_mass: f64 = block.iter().map(|&x| mass[x]).sum();
        if block_mass == 0.0 {
            if pre_mass > 0.0 {
                return Err(Error::Domain(
                    "blockwise preimage density undefined: a zero-mass block carries positive \
                     preimage mass"
                        .into(),
                ));
            }
            continue;
        }
        let v = pre_mass / block_mass;
        for &x in block {
            values[x] = v;
        }
    }
    Ok(MeasFn::new(values).expect("mass ratios are finite"))
}

/// Tolerance for the factored-density cross-checks.
pub const RN_CHAIN_TOL: f64 = 1e-10;

/// Deviations of the factored density identities from the directly
/// computed `h_n`.
#[derive(Debug, Clone)]
pub struct RnChainReport {
    /// Number of steps checked.
    pub n: usize,
    /// Worst relative deviation of `∏_{i<n} h∘φ^{−i}` from `h_n`.
    pub product_dev: f64,
    /// Worst relative deviation of the one-step recursion
    /// `h_{m+1} = h · (E(h_m | φ^{−1}Σ)) ∘ φ^{−1}` over `m < n`.
    pub recursion_dev: f64,
    /// True when both deviations stay within [`RN_CHAIN_TOL`].
    pub passed: bool,
}

/// For each positive atom, its unique positive-mass preimage, when `φ`
/// restricts to a bijection of the positive atoms; `None` otherwise.
pub fn positive_inverse(phi: &Transformation, space: &FiniteMeasureSpace) -> Option<Vec<usize>> {
    let mut inv = vec![usize::MAX; phi.len()];
    for a in space.positive_atoms() {
        let b = phi.apply(a);
        if space.is_null_atom(b) || inv[b] != usize::MAX {
            return None;
        }
        inv[b] = a;
    }
    if space.positive_atoms().any(|b| inv[b] == usize::MAX) {
        return None;
    }
    Some(inv)
}

/// Verifies the product form and the one-step recursion for `h_n` against
/// the directly computed preimage densities.
///
/// Requires `φ` to restrict to a bijection of the positive atoms, so that
/// the backward compositions are single-valued.
pub fn rn_chain_check(
    phi: &Transformation,
    space: &FiniteMeasureSpace,
    n: usize,
) -> Result<RnChainReport> {
    let inv = positive_inverse(phi, space).ok_or_else(|| {
        Error::Unsupported(
            "factored density check needs φ to restrict to a bijection of the positive atoms"
                .into(),
        )
    })?;
    let h = rn_derivative_n(phi, space, 1)?;
    let positive: Vec<usize> = space.positive_atoms().collect();

    // Product form: h_n(b) = ∏_{i=0}^{n−1} h(φ^{−i}(b)).
    let mut product_dev = 0.0f64;
    let h_n = rn_derivative_n(phi, space, n)?;
    for &b in &positive {
        let mut prod = 1.0;
        let mut cur = b;
        for _ in 0..n {
            prod *= h.get(cur);
            cur = inv[cur];
        }
        let reference = h_n.get(b);
        product_dev =
            product_dev.max((prod - reference).abs() / (1.0 + prod.abs().max(reference.abs())));
    }

    // Recursion: h_{m+1} = h · (E(h_m | φ^{−1}Σ)) ∘ φ^{−1}.
    let pull = pullback_partition(phi, &Partition::discrete(space.len()));
    let mut recursion_dev = 0.0f64;
    for m in 0..n {
        let h_m = rn_derivative_n(phi, space, m)?;
        let h_m1 = rn_derivative_n(phi, space, m + 1)?;
        let e_h_m = cond_exp(&h_m, &pull, space);
        for &b in &positive {
            let composed = h.get(b) * e_h_m.get(inv[b]);
            let reference = h_m1.get(b);
            recursion_dev = recursion_dev
                .max((composed - reference).abs() / (1.0 + composed.abs().max(reference.abs())));
        }
    }

    Ok(RnChainReport {
        n,
        product_dev,
        recursion_dev,
        passed: product_dev <= RN_CHAIN_TOL && recursion_dev <= RN_CHAIN_TOL,
    })
}

/// Forward-density profile of a transformation.
#[derive(Debug, Clone)]
pub struct NormalProfile {
    /// True when `μ∘φ ≪ μ`, i.e. every zero-mass atom maps to a zero-mass
    /// atom.
    pub normal: bool,
    /// `h♯(a) = μ({φ(a)}) / μ(a)` on positive atoms when normal.
    pub h_sharp: Option<MeasFn>,
    /// Worst relative deviation of `h♯` from `1/(h∘φ)` over atoms whose
    /// image fiber has a unique positive preimage; `None` when not normal.
    pub inverse_relation_dev: Option<f64>,
}

/// Checks `μ∘φ ≪ μ` and computes the forward density and its cross-check
/// against the reciprocal preimage density.
pub fn normal_profile(phi: &Transformation, space: &FiniteMeasureSpace) -> NormalProfile {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    let normal = (0..space.len())
        .filter(|&a| space.is_null_atom(a))
        .all(|a| space.is_null_atom(phi.apply(a)));
    if !normal {
        return NormalProfile {
            normal: false,
            h_sharp: None,
            inverse_relation_dev: None,
        };
    }
    let h_sharp = h_sharp_n(phi, space, 1).expect("normality was just established");
    let h = is_nonsingular(phi, space).h;
    let lists = phi.preimage_lists();
    let mut dev = 0.0f64;
    for a in space.positive_atoms() {
        let b = phi.apply(a);
        if space.is_null_atom(b) {
            continue;
        }
        let positive_fiber = lists[b].iter().filter(|&&x| !space.is_null_atom(x)).count();
        if positive_fiber == 1 && h.get(b) > 0.0 {
            let recip = 1.0 / h.get(b);
            let direct = h_sharp.get(a);
            dev = dev.max((recip - direct).abs() / (1.0 + direct.abs().max(recip.abs())));
        }
    }
    NormalProfile {
        normal: true,
        h_sharp: Some(h_sharp),
        inverse_relation_dev: Some(dev),
    }
}

/// Forward density `h♯_n(a) = μ({φⁿ(a)}) / μ(a)` on positive atoms
/// (`0` on null atoms); errors when `μ∘φ` is not absolutely continuous.
pub fn h_sharp_n(phi: &Transformation, space: &FiniteMeasureSpace, n: usize) -> Result<MeasFn> {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    let normal = (0..space.len())
        .filter(|&a| space.is_null_atom(a))
        .all(|a| space.is_null_atom(phi.apply(a)));
    if !normal {
        return Err(Error::Domain(
            "forward density undefined: a zero-mass atom maps to positive mass".into(),
        ));
    }
    let phi_n = phi.iterate(n);
    let values = (0..space.len())
        .map(|a| {
            if space.is_null_atom(a) {
                0.0
            } else {
                space.weight(phi_n.apply(a)) / space.weight(a)
            }
        })
        .collect();
    Ok(MeasFn::new(values).expect("mass ratios are finite"))
}

/// Blockwise forward density: on each block `B` of `a` the constant
/// `μ(φⁿ(B)) / μ(B)` (set image, so overlapping image atoms count once),
/// `0` on zero-mass blocks.
pub fn h_sharp_n_on(
    phi: &Transformation,
    space: &FiniteMeasureSpace,
    a: &Partition,
    n: usize,
) -> Result<MeasFn> {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    assert_eq!(a.atom_count(), space.len(), "partition/space mismatch");
    let phi_n = phi.iterate(n);
    let mut values = vec![0.0; space.len()];
    for (b, block) in a.blocks().iter().enumerate() {
        let block_mass = a.block_mass(b, space);
        let image: AtomSet = block.iter().map(|&x| phi_n.apply(x)).collect();
        let image_mass = space.mass_of(&image);
        if block_mass == 0.0 {
            if image_mass > 0.0 {
                return Err(Error::Domain(
                    "blockwise forward density undefined: a zero-mass block has positive image \
                     mass"
                        .into(),
                ));
            }
            continue;
        }
        let v = image_mass / block_mass;
        for &x in block {
            values[x] = v;
        }
    }
    Ok(MeasFn::new(values).expect("mass ratios are finite"))
}

/// Least `m ≥ 1` with `φ^m = id`, when `φ` is a permutation and the period
/// does not exceed `m_max`; `None` otherwise.
pub fn detect_period(phi: &Transformation, m_max: usize) -> Option<usize> {
    let lengths = phi.cycle_lengths()?;
    let mut lcm: u128 = 1;
    for len in lengths {
        let len = len as u128;
        lcm = lcm / gcd(lcm, len) * len;
        if lcm > m_max as u128 {
            return None;
        }
    }
    Some(lcm as usize)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Witness that forward images of `f_set` eventually stop meeting it.
///
/// Iterates the set images `φⁿ(F)` until the (finite) sequence closes into a
/// cycle. If no cycle member meets `F`, returns the last index `N` of the
/// transient with `φ^N(F) ∩ F ≠ ∅` (`0` when none), so that
/// `φⁿ(F) ∩ F = ∅` for every `n > N`. Returns `None` when some recurring
/// image meets `F`, or when the sequence has not closed within `n_max`
/// steps (unknown within the horizon).
pub fn finitely_nonmixing_witness(
    phi: &Transformation,
    f_set: &AtomSet,
    n_max: usize,
) -> Option<usize> {
    nonmixing_witness_impl(f_set, n_max, |s| phi.image_set(s))
}

/// Backward variant of [`finitely_nonmixing_witness`], iterating set
/// preimages `φ^{−n}(F)` instead of images.
pub fn finitely_nonmixing_witness_backward(
    phi: &Transformation,
    f_set: &AtomSet,
    n_max: usize,
) -> Option<usize> {
    nonmixing_witness_impl(f_set, n_max, |s| phi.preimage_set(s))
}

fn nonmixing_witness_impl(
    f_set: &AtomSet,
    n_max: usize,
    step: impl Fn(&AtomSet) -> AtomSet,
) -> Option<usize> {
    assert!(!f_set.is_empty(), "reference set must be nonempty");
    assert!(n_max >= 1, "need at least one step");
    let key = |s: &AtomSet| s.iter().copied().collect::<Vec<usize>>();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut meets: Vec<bool> = vec![true]; // index n = 0 is F itself
    seen.insert(key(f_set), 0);
    let mut cur = f_set.clone();
    let mut last_meet = 0usize;
    for n in 1..=n_max {
        cur = step(&cur);
        let meets_f = cur.intersection(f_set).next().is_some();
        if meets_f {
            last_meet = n;
        }
        if let Some(&j) = seen.get(&key(&cur)) {
            // Sets with index ≥ j recur forever; the candidate witness is
            // valid only when no recurring set meets F.
            if meets_f || meets[j..].iter().any(|&m| m) {
                return None;
            }
            return Some(last_meet);
        }
        meets.push(meets_f);
        seen.insert(key(&cur), n);
    }
    None
}

/// Limit partition of the backward iteration: the common refinement limit
/// of the pullbacks `φ^{−n}` of the discrete partition, i.e. atoms are
/// grouped by the eventual coincidence of their forward orbits.
pub fn sigma_infinity(phi: &Transformation) -> Partition {
    let mut cur = pullback_partition(phi, &Partition::discrete(phi.len()));
    loop {
        let next = pullback_partition(phi, &cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Everything the dynamics layer wants to know about a transformation.
#[derive(Debug, Clone)]
pub struct TransformProfile {
    /// Permutation period, when one exists within the probed bound.
    pub period: Option<usize>,
    /// Whether `μ∘φ^{−1} ≪ μ`.
    pub nonsingular: bool,
    /// Whether `μ∘φ ≪ μ`.
    pub normal: bool,
    /// Single-step preimage density (see [`is_nonsingular`]).
    pub h: MeasFn,
    /// Single-step forward density when normal.
    pub h_sharp: Option<MeasFn>,
    /// Limit partition of the backward iteration.
    pub sigma_infinity: Partition,
}

/// Assembles the full transformation profile.
pub fn profile(
    phi: &Transformation,
    space: &FiniteMeasureSpace,
    m_max: usize,
) -> TransformProfile {
    let ns = is_nonsingular(phi, space);
    let np = normal_profile(phi, space);
    TransformProfile {
        period: detect_period(phi, m_max),
        nonsingular: ns.nonsingular,
        normal: np.normal,
        h: ns.h,
        h_sharp: np.h_sharp,
        sigma_infinity: sigma_infinity(phi),
    }
}

/// Values of `g ∘ φ^{−n}` on a requested set of atoms, walking preimage
/// chains through positive atoms only.
///
/// Atoms with no positive `n`-fold preimage get `0`. Atoms whose positive
/// preimages disagree about the value of `g` make the composition genuinely
/// multi-valued there and produce an error naming the atom.
pub fn backward_compose_on(
    phi: &Transformation,
    space: &FiniteMeasureSpace,
    g: &MeasFn,
    n: usize,
    atoms: &AtomSet,
) -> Result<Vec<(usize, f64)>> {
    assert_eq!(phi.len(), space.len(), "map/space size mismatch");
    assert_eq!(g.len(), space.len(), "function/space length mismatch");
    let lists = phi.preimage_lists();
    let mut out = Vec::with_capacity(atoms.len());
    for &y in atoms {
        if y >= space.len() {
            return Err(Error::InvalidInput(format!(
                "atom index {y} out of range for {} atoms",
                space.len()
            )));
        }
        let mut level: Vec<usize> = vec![y];
        for _ in 0..n {
            let mut next: Vec<usize> = level
                .iter()
                .flat_map(|&z| lists[z].iter().copied())
                .filter(|&x| !space.is_null_atom(x))
                .collect();
            next.sort_unstable();
            next.dedup();
            level = next;
            if level.is_empty() {
                break;
            }
        }
        let value = match level.as_slice() {
            [] => 0.0,
            [x] => g.get(*x),
            xs => {
                let first = g.get(xs[0]);
                if xs.iter().all(|&x| g.get(x) == first) {
                    first
                } else {
                    return Err(Error::Unsupported(format!(
                        "backward composition at atom '{}' is multi-valued after {n} step(s)",
                        space.id(y)
                    )));
                }
            }
        };
        out.push((y, value));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{integrate, rel_dev};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cycle4() -> Transformation {
        Transformation::new(vec![1, 2, 3, 0]).unwrap()
    }

    #[test]
    fn construction_guards() {
        assert!(Transformation::new(vec![]).is_err(), "empty map rejected");
        assert!(
            Transformation::new(vec![0, 3]).is_err(),
            "out-of-range image rejected"
        );
    }

    #[test]
    fn compose_and_iterate() {
        let phi = cycle4();
        assert_eq!(phi.iterate(0).image(), Transformation::identity(4).image());
        assert_eq!(phi.iterate(2).image(), &[2, 3, 0, 1]);
        assert_eq!(phi.iterate(4).image(), Transformation::identity(4).image());
        assert_eq!(phi.compose(&phi).image(), phi.iterate(2).image());
    }

    #[test]
    fn pullback_partition_of_symmetric_pairs_under_the_cycle() {
        // Blocks {0,1} and {2,3} pull back to {0,3} and {1,2} under the
        // 4-cycle, which is *not* coarser than the original pairing.
        let a = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let pulled = pullback_partition(&cycle4(), &a);
        assert_eq!(
            pulled,
            Partition::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap()
        );
        assert!(!crate::measure_space::is_coarser(&pulled, &a));
    }

    #[test]
    fn nonsingularity_and_preimage_density_chain_example() {
        // 1 → 1, 2 → 1, 3 → 2 on unit weights: h₁ = (2, 1, 0), h₂ = (3, 0, 0).
        let phi = Transformation::new(vec![0, 0, 1]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0, 1.0, 1.0]).unwrap();
        let ns = is_nonsingular(&phi, &sp);
        assert!(ns.nonsingular);
        assert_eq!(ns.h.values(), &[2.0, 1.0, 0.0]);
        assert_eq!(rn_derivative_n(&phi, &sp, 2).unwrap().values(), &[3.0, 0.0, 0.0]);
        assert_eq!(
            rn_derivative_n(&phi, &sp, 0).unwrap().values(),
            &[1.0, 1.0, 1.0],
            "zero steps give the constant density 1"
        );
    }

    #[test]
    fn singular_map_is_flagged_and_errors() {
        let phi = Transformation::new(vec![1, 1]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0, 0.0]).unwrap();
        assert!(!is_nonsingular(&phi, &sp).nonsingular);
        assert!(rn_derivative_n(&phi, &sp, 1).is_err());
    }

    #[test]
    fn forward_density_swap_example() {
        // Swap on weights (1, 2): h = (2, 1/2) and h♯ = (2, 1/2) = 1/(h∘φ).
        let phi = Transformation::new(vec![1, 0]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0, 2.0]).unwrap();
        let ns = is_nonsingular(&phi, &sp);
        assert_eq!(ns.h.values(), &[2.0, 0.5]);
        let np = normal_profile(&phi, &sp);
        assert!(np.normal);
        assert_eq!(np.h_sharp.as_ref().unwrap().values(), &[2.0, 0.5]);
        assert!(
            np.inverse_relation_dev.unwrap() <= 1e-15,
            "h♯ must agree with 1/(h∘φ) on unique fibers"
        );
    }

    #[test]
    fn non_normal_map_has_no_forward_density() {
        let phi = Transformation::new(vec![0, 0]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0, 0.0]).unwrap();
        let np = normal_profile(&phi, &sp);
        assert!(!np.normal, "null atom mapping onto mass is not normal");
        assert!(h_sharp_n(&phi, &sp, 1).is_err());
    }

    #[test]
    fn blockwise_densities() {
        let phi = cycle4();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        // φ^{-1}({0,1}) = {3,0} of mass 5 over μ({0,1}) = 3; φ^{-1}({2,3})
        // = {1,2} of mass 5 over μ({2,3}) = 7.
        let ha = rn_derivative_n_on(&phi, &sp, &a, 1).unwrap();
        assert_eq!(ha.values(), &[5.0 / 3.0, 5.0 / 3.0, 5.0 / 7.0, 5.0 / 7.0]);
        // φ({0,1}) = {1,2} of mass 5.
        let hs = h_sharp_n_on(&phi, &sp, &a, 1).unwrap();
        assert_eq!(hs.values(), &[5.0 / 3.0, 5.0 / 3.0, 5.0 / 7.0, 5.0 / 7.0]);
    }

    #[test]
    fn period_detection() {
        assert_eq!(detect_period(&Transformation::identity(3), 10), Some(1));
        assert_eq!(detect_period(&cycle4(), 10), Some(4));
        assert_eq!(detect_period(&cycle4(), 3), None, "period above the bound");
        let not_injective = Transformation::new(vec![0, 0]).unwrap();
        assert_eq!(detect_period(&not_injective, 10), None);
        // 2-cycle × 3-cycle has period lcm(2, 3) = 6.
        let mixed = Transformation::new(vec![1, 0, 3, 4, 2]).unwrap();
        assert_eq!(detect_period(&mixed, 10), Some(6));
    }

    #[test]
    fn period_matches_brute_force_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.gen_range(1..=8);
            let mut image: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                image.swap(i, rng.gen_range(0..=i));
            }
            let phi = Transformation::new(image).unwrap();
            let fast = detect_period(&phi, 10_000).unwrap();
            let mut cur = phi.clone();
            let mut brute = 1;
            while cur.image() != Transformation::identity(n).image() {
                cur = phi.compose(&cur);
                brute += 1;
            }
            assert_eq!(fast, brute, "cycle-length lcm must match iteration");
        }
    }

    #[test]
    fn nonmixing_witness_examples() {
        // Fixed point: every image meets F, so no witness exists.
        let fixed = Transformation::new(vec![0, 1]).unwrap();
        let f: AtomSet = [0].into_iter().collect();
        assert_eq!(finitely_nonmixing_witness(&fixed, &f, 50), None);

        // Path 0 → 1 → … → 7 → 7 absorbing: images leave F = {0} at once
        // and never return, so N = 0.
        let path = Transformation::new(vec![1, 2, 3, 4, 5, 6, 7, 7]).unwrap();
        assert_eq!(finitely_nonmixing_witness(&path, &f, 50), Some(0));

        // 4-cycle: F = {0} recurs forever.
        assert_eq!(finitely_nonmixing_witness(&cycle4(), &f, 50), None);

        // Transient hit: 0 → 1 → 0' style revisit before absorption.
        // 0 → 1, 1 → 0 is a 2-cycle: recurs, no witness.
        let swap = Transformation::new(vec![1, 0]).unwrap();
        assert_eq!(finitely_nonmixing_witness(&swap, &f, 50), None);

        // Horizon too small to close the cycle: unknown, reported absent.
        assert_eq!(finitely_nonmixing_witness(&path, &f, 3), None);
    }

    #[test]
    fn backward_nonmixing_witness() {
        // Path with absorbing end, F = {7}: preimages of {7} are {6,7},
        // then {5,6,7}, …, always meeting F. No witness.
        let path = Transformation::new(vec![1, 2, 3, 4, 5, 6, 7, 7]).unwrap();
        let f_end: AtomSet = [7].into_iter().collect();
        assert_eq!(finitely_nonmixing_witness_backward(&path, &f_end, 50), None);
        // F = {0}: φ^{−1}{0} = ∅, which is fixed and disjoint from F: N = 0.
        let f0: AtomSet = [0].into_iter().collect();
        assert_eq!(finitely_nonmixing_witness_backward(&path, &f0, 50), Some(0));
    }

    #[test]
    fn sigma_infinity_examples() {
        // Bijections lose no information.
        assert_eq!(sigma_infinity(&cycle4()), Partition::discrete(4));
        // A constant map collapses everything in one step.
        let constant = Transformation::new(vec![0, 0, 0]).unwrap();
        assert_eq!(sigma_infinity(&constant), Partition::trivial(3));
        // 0 → 0, 1 → 0, 2 → 1, 3 → 2: the chain pulls back to
        // {{0,1},{2},{3}}, then {{0,1,2},{3}}, then the trivial partition.
        let chain = Transformation::new(vec![0, 0, 1, 2]).unwrap();
        assert_eq!(sigma_infinity(&chain), Partition::trivial(4));
    }

    #[test]
    fn change_of_variables_hand_check() {
        // ∫_{φ^{-n}(S)} f∘φⁿ dμ = ∫_S h_n f dμ.
        let phi = Transformation::new(vec![0, 0, 1, 2]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        let f = MeasFn::new(vec![2.0, -1.0, 4.0, 0.5]).unwrap();
        for n in 0..4 {
            let phi_n = phi.iterate(n);
            let s: AtomSet = [0, 1].into_iter().collect();
            let pre = phi_n.preimage_set(&s);
            let lhs = integrate(&phi_n.pullback_fn(&f), &pre, &sp).unwrap();
            let h_n = rn_derivative_n(&phi, &sp, n).unwrap();
            let rhs = integrate(&h_n.mul(&f), &s, &sp).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())),
                "n = {n}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn chain_check_passes_on_positive_bijections() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(1..=8);
            let mut image: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                image.swap(i, rng.gen_range(0..=i));
            }
            let phi = Transformation::new(image).unwrap();
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let sp = FiniteMeasureSpace::from_weights(weights).unwrap();
            let report = rn_chain_check(&phi, &sp, 8).unwrap();
            assert!(
                report.passed,
                "product dev {} / recursion dev {}",
                report.product_dev, report.recursion_dev
            );
        }
    }

    #[test]
    fn chain_check_rejects_non_bijective_maps() {
        let phi = Transformation::new(vec![0, 0, 1]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0; 3]).unwrap();
        assert!(matches!(
            rn_chain_check(&phi, &sp, 3),
            Err(crate::error::Error::Unsupported(_))
        ));
    }

    #[test]
    fn backward_compose_semantics() {
        // Absorbing path on unit weights: unique chains in the interior,
        // no preimage at the left edge, merged fibers at the right edge.
        let phi = Transformation::new(vec![1, 2, 3, 3]).unwrap();
        let sp = FiniteMeasureSpace::from_weights(vec![1.0; 4]).unwrap();
        let g = MeasFn::new(vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        // Atom 0 has no preimage → 0; atoms 1, 2 pull back uniquely; atom 3
        // has preimages {2, 3} with different g-values and errors if asked.
        let interior: AtomSet = (0..3).collect();
        let vals = backward_compose_on(&phi, &sp, &g, 1, &interior).unwrap();
        assert_eq!(vals, vec![(0, 0.0), (1, 10.0), (2, 20.0)]);
        let err = backward_compose_on(&phi, &sp, &g, 1, &[3].into_iter().collect());
        assert!(err.is_err(), "disagreeing fiber values are multi-valued");
        // If the fiber values agree, the composition is well-defined.
        let g2 = MeasFn::new(vec![10.0, 20.0, 5.0, 5.0]).unwrap();
        let ok = backward_compose_on(&phi, &sp, &g2, 1, &[3].into_iter().collect()).unwrap();
        assert_eq!(ok, vec![(3, 5.0)]);
    }

    #[test]
    fn rel_dev_on_pullbacks_is_exact_for_permutations() {
        let phi = cycle4();
        let f = MeasFn::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let pulled = phi.pullback_fn(&f);
        assert_eq!(pulled.values(), &[2.0, 3.0, 4.0, 1.0]);
        assert_eq!(rel_dev(&phi.iterate(4).pullback_fn(&f), &f), 0.0);
    }
}
