//! Property tests for the measure-space primitives: partition lattice
//! structure, measurability, mass accounting, and simple-function nets.

use cwco::measure_space::{
    is_coarser, is_measurable, lp_norm, lp_power_sum, meet, simple_net, AtomSet,
    FiniteMeasureSpace, MeasFn, Partition,
};
use cwco::sampling::{random_fn, random_partition, random_space, rng_from_seed};
use cwco::Error;
use proptest::prelude::*;

/// All partitions of `{0, …, n−1}` in restricted-growth-string order.
fn all_partitions(n: usize) -> Vec<Partition> {
    fn grow(labels: &mut Vec<usize>, used: usize, n: usize, out: &mut Vec<Partition>) {
        if labels.len() == n {
            out.push(Partition::from_labels(labels));
            return;
        }
        for label in 0..=used {
            labels.push(label);
            grow(labels, used.max(label + 1), n, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), 0, n, &mut out);
    out
}

#[test]
fn meet_is_the_greatest_lower_bound_exhaustively() {
    // Bell(5) = 52, so 52² pairs with 52 candidate lower bounds each.
    for n in 1..=5 {
        let parts = all_partitions(n);
        for a in &parts {
            for b in &parts {
                let m = meet(a, b);
                assert!(is_coarser(&m, a), "meet must be coarser than the left operand");
                assert!(is_coarser(&m, b), "meet must be coarser than the right operand");
                for c in &parts {
                    if is_coarser(c, a) && is_coarser(c, b) {
                        assert!(
                            is_coarser(c, &m),
                            "every common coarsening must factor through the meet \
                             (n = {n}, a = {a:?}, b = {b:?}, c = {c:?})"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn simple_net_enumerates_exactly_and_respects_the_cap() {
    let a = Partition::from_labels(&[0, 0, 1, 1, 2, 2]);
    let net = simple_net(&a, &[-1.0, 0.0, 1.0], 3, 1_000).expect("within cap");
    assert_eq!(net.len(), 27, "3 values on 3 blocks give 3³ members");
    let mut seen = std::collections::BTreeSet::new();
    for f in &net {
        assert!(is_measurable(f, &a), "net members must be block-constant");
        let key: Vec<i64> = f.values().iter().map(|v| *v as i64).collect();
        assert!(seen.insert(key), "net members must be pairwise distinct");
    }
    let err = simple_net(&a, &[-1.0, 0.0, 1.0], 3, 26).unwrap_err();
    assert!(
        matches!(err, Error::CapExceeded { count: 27, cap: 26 }),
        "an over-budget net must refuse with the exact count, got {err:?}"
    );
}

#[test]
fn simple_net_support_bound_counts_supported_blocks() {
    let a = Partition::from_labels(&[0, 1, 2, 3]);
    let net = simple_net(&a, &[0.0, 1.0], 1, 1_000).expect("within cap");
    // Support in at most one block: the zero function plus one per block.
    assert_eq!(net.len(), 5, "support bound 1 on 4 blocks with grid {{0,1}}");
    for f in &net {
        let supported = (0..a.block_count())
            .filter(|&b| a.block(b).iter().any(|&x| f.get(x) != 0.0))
            .count();
        assert!(supported <= 1, "support spread over {supported} blocks");
    }
}

proptest! {
    #[test]
    fn block_masses_add_up_to_the_total(seed in 0u64..500) {
        let mut rng = rng_from_seed(seed);
        let space = random_space(&mut rng, 24);
        let a = random_partition(&mut rng, space.len());
        let sum: f64 = (0..a.block_count()).map(|b| a.block_mass(b, &space)).sum();
        prop_assert!(
            (sum - space.total_mass()).abs() <= 1e-12 * (1.0 + space.total_mass()),
            "block masses {sum} must recompose the total {}",
            space.total_mass()
        );
    }

    #[test]
    fn meet_of_random_partitions_is_a_common_coarsening(seed in 0u64..500) {
        let mut rng = rng_from_seed(seed);
        let n = 1 + (seed as usize % 20);
        let a = random_partition(&mut rng, n);
        let b = random_partition(&mut rng, n);
        let m = meet(&a, &b);
        prop_assert!(is_coarser(&m, &a) && is_coarser(&m, &b));
        prop_assert!(is_coarser(&Partition::trivial(n), &m));
        prop_assert!(is_coarser(&m, &Partition::discrete(n)));
    }

    #[test]
    fn measurability_matches_block_constancy(seed in 0u64..500) {
        let mut rng = rng_from_seed(seed);
        let n = 2 + (seed as usize % 16);
        let a = random_partition(&mut rng, n);
        let block_values = random_fn(&mut rng, a.block_count(), 3.0);
        let f = MeasFn::from_fn(n, |x| block_values.get(a.block_of(x)))
            .expect("finite values");
        prop_assert!(is_measurable(&f, &a), "block-constant functions are measurable");
        if let Some(b) = (0..a.block_count()).find(|&b| a.block(b).len() >= 2) {
            let atom = a.block(b)[0];
            let bent = MeasFn::from_fn(n, |x| f.get(x) + if x == atom { 1.0 } else { 0.0 })
                .expect("finite values");
            prop_assert!(
                !is_measurable(&bent, &a),
                "bending one atom of a multi-atom block must break measurability"
            );
        }
    }

    #[test]
    fn lp_norm_is_homogeneous_and_subadditive(seed in 0u64..500, p_idx in 0usize..3) {
        let p = [1.0, 2.0, 3.0][p_idx];
        let mut rng = rng_from_seed(seed);
        let space = random_space(&mut rng, 16);
        let f = random_fn(&mut rng, space.len(), 2.0);
        let g = random_fn(&mut rng, space.len(), 2.0);
        let nf = lp_norm(&f, p, &space).expect("valid p");
        let ng = lp_norm(&g, p, &space).expect("valid p");
        let scaled = lp_norm(&f.scale(-2.5), p, &space).expect("valid p");
        prop_assert!(
            (scaled - 2.5 * nf).abs() <= 1e-10 * (1.0 + nf),
            "|c|-homogeneity: ‖−2.5·f‖ = {scaled} vs 2.5·{nf}"
        );
        let sum = lp_norm(&f.add(&g), p, &space).expect("valid p");
        prop_assert!(
            sum <= nf + ng + 1e-10 * (1.0 + nf + ng),
            "triangle inequality: {sum} > {nf} + {ng}"
        );
    }

    #[test]
    fn power_sum_ignores_null_atoms(seed in 0u64..300) {
        let mut rng = rng_from_seed(seed);
        let space = random_space(&mut rng, 16);
        let f = random_fn(&mut rng, space.len(), 2.0);
        let masked = MeasFn::from_fn(space.len(), |x| {
            if space.is_null_atom(x) { 1e300 } else { f.get(x) }
        })
        .expect("finite values");
        let a = lp_power_sum(&f, 2.0, &space).expect("valid p");
        let b = lp_power_sum(&masked, 2.0, &space).expect("valid p");
        prop_assert_eq!(
            a.to_bits(), b.to_bits(),
            "values on null atoms must not contribute to the power sum"
        );
    }

    #[test]
    fn restriction_is_an_indicator_product(seed in 0u64..300) {
        let mut rng = rng_from_seed(seed);
        let n = 1 + (seed as usize % 12);
        let f = random_fn(&mut rng, n, 2.0);
        let set: AtomSet = (0..n).filter(|x| x % 3 != 1).collect();
        let direct = f.restrict(&set);
        let via_mul = f.mul(&MeasFn::indicator(&set, n));
        prop_assert_eq!(direct.values(), via_mul.values());
    }
}

#[test]
fn rejects_malformed_spaces_and_partitions() {
    assert!(
        FiniteMeasureSpace::new(vec!["a", "a"], vec![1.0, 1.0]).is_err(),
        "duplicate atom ids must be rejected"
    );
    assert!(
        FiniteMeasureSpace::new(vec!["a", "b"], vec![1.0, -0.5]).is_err(),
        "negative weights must be rejected"
    );
    assert!(
        FiniteMeasureSpace::new(vec!["a"], vec![1.0, 2.0]).is_err(),
        "id/weight length mismatch must be rejected"
    );
    assert!(
        Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err(),
        "overlapping blocks must be rejected"
    );
    assert!(
        Partition::new(3, vec![vec![0, 1]]).is_err(),
        "blocks must cover every atom"
    );
    assert!(MeasFn::new(vec![1.0, f64::NAN]).is_err(), "NaN values must be rejected");
}
