//! Seeded random generators for spaces, weights, partitions, and
//! transformations, plus instance builders whose structural guarantees
//! (pullback invariance, small permutation periods) the property suites
//! rely on.
//!
//! Everything takes the RNG explicitly and draws nothing else, so a fixed
//! seed reproduces a run bit for bit.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::measure_space::{FiniteMeasureSpace, MeasFn, Partition};
use crate::operators::ConditionalWCO;
use crate::transform::{pullback_partition, Transformation};

/// Probability that a sampled weight or value is exactly zero.
pub const ZERO_RATE: f64 = 0.15;

/// The crate's standard seeded RNG.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// A space with 1..=`max_atoms` atoms; weights are `0` with probability
/// [`ZERO_RATE`] and otherwise uniform in `[0.05, 2)`, with at least one
/// positive atom.
pub fn random_space<R: Rng>(rng: &mut R, max_atoms: usize) -> FiniteMeasureSpace {
    assert!(max_atoms >= 1, "need at least one atom");
    let n = rng.gen_range(1..=max_atoms);
    let mut weights: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(ZERO_RATE) { 0.0 } else { rng.gen_range(0.05..2.0) })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        weights[rng.gen_range(0..n)] = rng.gen_range(0.05..2.0);
    }
    FiniteMeasureSpace::from_weights(weights).expect("sampled weights are valid")
}

/// A space with 1..=`max_atoms` atoms, all of positive mass.
pub fn random_positive_space<R: Rng>(rng: &mut R, max_atoms: usize) -> FiniteMeasureSpace {
    assert!(max_atoms >= 1, "need at least one atom");
    let n = rng.gen_range(1..=max_atoms);
    FiniteMeasureSpace::from_weights((0..n).map(|_| rng.gen_range(0.05..2.0)).collect())
        .expect("sampled weights are valid")
}

/// Uniform values in `(−amp, amp)`, exactly zero with probability
/// [`ZERO_RATE`].
pub fn random_fn<R: Rng>(rng: &mut R, len: usize, amp: f64) -> MeasFn {
    MeasFn::new(
        (0..len)
            .map(|_| if rng.gen_bool(ZERO_RATE) { 0.0 } else { rng.gen_range(-amp..amp) })
            .collect(),
    )
    .expect("sampled values are finite")
}

/// Uniform values in `[lo, hi)`, never zero.
pub fn random_positive_fn<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> MeasFn {
    assert!(lo > 0.0 && hi > lo, "need 0 < lo < hi");
    MeasFn::new((0..len).map(|_| rng.gen_range(lo..hi)).collect())
        .expect("sampled values are finite")
}

/// A uniformly labeled partition with 1..=`n` blocks.
pub fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Partition {
    assert!(n >= 1, "need at least one atom");
    let blocks = rng.gen_range(1..=n);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..blocks)).collect();
    Partition::from_labels(&labels)
}

/// An arbitrary self-map of `n` atoms.
pub fn random_map<R: Rng>(rng: &mut R, n: usize) -> Transformation {
    assert!(n >= 1, "need at least one atom");
    Transformation::new((0..n).map(|_| rng.gen_range(0..n)).collect()).expect("in range")
}

/// A uniform permutation of `n` atoms.
pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Transformation {
    assert!(n >= 1, "need at least one atom");
    let mut image: Vec<usize> = (0..n).collect();
    image.shuffle(rng);
    Transformation::new(image).expect("permutations are in range")
}

/// A self-map sending positive atoms to positive atoms (hence
/// nonsingular); null atoms map anywhere.
pub fn random_nonsingular_map<R: Rng>(
    rng: &mut R,
    space: &FiniteMeasureSpace,
) -> Transformation {
    let positive: Vec<usize> = space.positive_atoms().collect();
    assert!(!positive.is_empty(), "need a positive atom");
    let n = space.len();
    let image = (0..n)
        .map(|a| {
            if space.is_null_atom(a) {
                rng.gen_range(0..n)
            } else {
                positive[rng.gen_range(0..positive.len())]
            }
        })
        .collect();
    Transformation::new(image).expect("in range")
}

/// A permutation whose cycle lengths come from `{1, 2, 3, 4, 6}`, so its
/// period divides 12.
pub fn random_small_period_permutation<R: Rng>(rng: &mut R, n: usize) -> Transformation {
    assert!(n >= 1, "need at least one atom");
    const LENGTHS: [usize; 5] = [1, 2, 3, 4, 6];
    let mut atoms: Vec<usize> = (0..n).collect();
    atoms.shuffle(rng);
    let mut image = vec![0usize; n];
    let mut start = 0;
    while start < n {
        let fitting: Vec<usize> =
            LENGTHS.iter().copied().filter(|&l| l <= n - start).collect();
        let len = fitting[rng.gen_range(0..fitting.len())];
        for i in 0..len {
            image[atoms[start + i]] = atoms[start + (i + 1) % len];
        }
        start += len;
    }
    Transformation::new(image).expect("cycles cover every atom")
}

/// The cycles of a permutation, as atom lists.
fn permutation_cycles(phi: &Transformation) -> Vec<Vec<usize>> {
    assert!(phi.is_permutation(), "cycle decomposition needs a permutation");
    let n = phi.len();
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut cur = phi.apply(start);
        while cur != start {
            seen[cur] = true;
            cycle.push(cur);
            cur = phi.apply(cur);
        }
        cycles.push(cycle);
    }
    cycles
}

/// A partition whose blocks are unions of `φ`-cycles (hence exactly
/// `φ`-invariant), with at most `max_blocks` blocks.
pub fn random_cycle_union_partition<R: Rng>(
    rng: &mut R,
    phi: &Transformation,
    max_blocks: usize,
) -> Partition {
    assert!(max_blocks >= 1, "need at least one block");
    let mut cycles = permutation_cycles(phi);
    cycles.shuffle(rng);
    let groups = rng.gen_range(1..=max_blocks.min(cycles.len()));
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for (i, cycle) in cycles.into_iter().enumerate() {
        let g = if i < groups { i } else { rng.gen_range(0..groups) };
        blocks[g].extend(cycle);
    }
    Partition::new(phi.len(), blocks).expect("cycles partition the atoms")
}

/// Space, map, and projection partition with `φ^{−1}A ⊆ A` guaranteed:
/// the partition is a member of the map's own pullback chain (depth
/// 1..=3) over an all-positive space, so its pullback is the next, coarser
/// chain member.
pub fn random_valid_parts<R: Rng>(
    rng: &mut R,
    max_atoms: usize,
) -> (FiniteMeasureSpace, Transformation, Partition) {
    let space = random_positive_space(rng, max_atoms);
    let phi = random_map(rng, space.len());
    let depth = rng.gen_range(1..=3);
    let mut a = pullback_partition(&phi, &Partition::discrete(space.len()));
    for _ in 1..depth {
        a = pullback_partition(&phi, &a);
    }
    (space, phi, a)
}

/// A full operator on [`random_valid_parts`] with a random weight
/// (including exact zeros) and the given exponent.
pub fn random_valid_instance<R: Rng>(rng: &mut R, max_atoms: usize, p: f64) -> ConditionalWCO {
    let (space, phi, a) = random_valid_parts(rng, max_atoms);
    let u = random_fn(rng, space.len(), 2.0);
    ConditionalWCO::new(space, a, phi, u, p).expect("sampled instance is well-formed")
}

/// Space, small-period permutation, and cycle-union partition — the
/// invariant (`φ^{−1}A = A`) periodic setting.
pub fn random_invariant_permutation_parts<R: Rng>(
    rng: &mut R,
    max_atoms: usize,
    max_blocks: usize,
) -> (FiniteMeasureSpace, Transformation, Partition) {
    let space = random_positive_space(rng, max_atoms);
    let phi = random_small_period_permutation(rng, space.len());
    let a = random_cycle_union_partition(rng, &phi, max_blocks);
    (space, phi, a)
}
