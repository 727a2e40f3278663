//! Property tests for transformations and their densities: the
//! change-of-variable identity, pullback-chain structure, inverses on the
//! positive part, periods, and the forward/backward density relation.

use cwco::measure_space::{integrate, is_coarser, Partition};
use cwco::sampling::{
    random_fn, random_map, random_nonsingular_map, random_permutation,
    random_positive_space, random_small_period_permutation, random_space, rng_from_seed,
};
use cwco::transform::{
    detect_period, is_nonsingular, normal_profile, positive_inverse, pullback_partition,
    rn_chain_check, rn_derivative_n, sigma_infinity, Transformation,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn change_of_variable_identity_holds(seed in 0u64..400, n in 0usize..8) {
        let mut rng = rng_from_seed(seed);
        let space = random_space(&mut rng, 24);
        let phi = random_nonsingular_map(&mut rng, &space);
        let g = random_fn(&mut rng, space.len(), 3.0);
        let h_n = rn_derivative_n(&phi, &space, n).expect("nonsingular by construction");
        let all: cwco::measure_space::AtomSet = (0..space.len()).collect();
        let lhs = integrate(&phi.iterate(n).pullback_fn(&g), &all, &space)
            .expect("indices valid");
        let rhs = integrate(&g.mul(&h_n), &all, &space).expect("indices valid");
        prop_assert!(
            (lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs() + rhs.abs()),
            "∫ g∘φⁿ dμ = {lhs} must equal ∫ g·hₙ dμ = {rhs} (n = {n})"
        );
    }

    #[test]
    fn density_masses_recompose_the_preimage_mass(seed in 0u64..400) {
        let mut rng = rng_from_seed(seed);
        let space = random_space(&mut rng, 20);
        let phi = random_nonsingular_map(&mut rng, &space);
        let h = rn_derivative_n(&phi, &space, 1).expect("nonsingular by construction");
        for b in 0..space.len() {
            let fiber_mass: f64 = (0..space.len())
                .filter(|&a| phi.apply(a) == b)
                .map(|a| space.weight(a))
                .sum();
            let modeled = h.get(b) * space.weight(b);
            prop_assert!(
                (fiber_mass - modeled).abs() <= 1e-12 * (1.0 + fiber_mass),
                "h·μ must equal the fiber mass at atom {b}: {modeled} vs {fiber_mass}"
            );
        }
    }

    #[test]
    fn pullback_chain_descends_and_stabilizes(seed in 0u64..400) {
        let mut rng = rng_from_seed(seed);
        let n = 1 + (seed as usize % 16);
        let phi = random_map(&mut rng, n);
        let mut chain = vec![Partition::discrete(n)];
        for _ in 0..2 * n {
            chain.push(pullback_partition(&phi, chain.last().expect("nonempty")));
        }
        for w in chain.windows(2) {
            prop_assert!(
                is_coarser(&w[1], &w[0]),
                "each pullback must be coarser than its predecessor"
            );
        }
        let last = &chain[chain.len() - 1];
        let fix = pullback_partition(&phi, last);
        prop_assert!(
            is_coarser(&fix, last) && is_coarser(last, &fix),
            "after n steps the chain must have stabilized"
        );
        let sigma = sigma_infinity(&phi);
        prop_assert!(
            is_coarser(&sigma, last) && is_coarser(last, &sigma),
            "the stable tail must agree with the limit partition"
        );
    }

    #[test]
    fn positive_inverse_inverts_on_the_positive_part(seed in 0u64..400) {
        let mut rng = rng_from_seed(seed);
        let space = random_positive_space(&mut rng, 20);
        let phi = random_permutation(&mut rng, space.len());
        let inv = positive_inverse(&phi, &space)
            .expect("permutations restrict to positive bijections");
        for a in space.positive_atoms() {
            prop_assert_eq!(inv[phi.apply(a)], a, "left inverse broke");
            prop_assert_eq!(phi.apply(inv[a]), a, "right inverse broke");
        }
    }

    #[test]
    fn collapsing_maps_have_no_positive_inverse(seed in 0u64..200) {
        let mut rng = rng_from_seed(seed);
        let space = random_positive_space(&mut rng, 12);
        if space.len() < 2 {
            return Ok(());
        }
        let image: Vec<usize> = (0..space.len()).map(|a| if a == 1 { 0 } else { a }).collect();
        let phi = Transformation::new(image).expect("in range");
        prop_assert!(
            positive_inverse(&phi, &space).is_none(),
            "a two-to-one map cannot restrict to a positive bijection"
        );
    }

    #[test]
    fn small_period_permutations_divide_twelve(seed in 0u64..400) {
        let mut rng = rng_from_seed(seed);
        let n = 1 + (seed as usize % 24);
        let phi = random_small_period_permutation(&mut rng, n);
        let m = detect_period(&phi, 64).expect("permutations on finite sets are periodic");
        prop_assert_eq!(12 % m, 0, "period {} must divide 12", m);
        prop_assert!(
            phi.iterate(m).image() == Transformation::identity(n).image(),
            "φ^m must be the identity"
        );
    }

    #[test]
    fn factored_density_chain_agrees_with_direct_powers(seed in 0u64..200, n in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let space = random_positive_space(&mut rng, 16);
        let phi = random_permutation(&mut rng, space.len());
        let report = rn_chain_check(&phi, &space, n).expect("positive bijection");
        prop_assert!(
            report.passed,
            "density factorizations drifted: product {} recursion {}",
            report.product_dev,
            report.recursion_dev
        );
    }

    #[test]
    fn forward_density_inverts_the_backward_one(seed in 0u64..300) {
        let mut rng = rng_from_seed(seed);
        let space = random_positive_space(&mut rng, 16);
        let phi = random_permutation(&mut rng, space.len());
        let profile = normal_profile(&phi, &space);
        prop_assert!(profile.normal, "permutations of positive spaces are normal");
        let dev = profile.inverse_relation_dev.expect("normal profile carries the check");
        prop_assert!(dev <= 1e-10, "h♯ must reciprocate h∘φ, worst deviation {dev}");
        let h_sharp = profile.h_sharp.expect("normal profile carries h♯");
        let h = is_nonsingular(&phi, &space).h;
        for a in space.positive_atoms() {
            let product = h_sharp.get(a) * h.get(phi.apply(a));
            prop_assert!(
                (product - 1.0).abs() <= 1e-10,
                "h♯(a)·h(φ(a)) must be 1 for bijections, got {product}"
            );
        }
    }
}

#[test]
fn composition_and_iteration_are_consistent() {
    let phi = Transformation::new(vec![1, 2, 0, 3]).expect("in range");
    let psi = Transformation::new(vec![0, 0, 3, 2]).expect("in range");
    let composed = phi.compose(&psi);
    for a in 0..4 {
        assert_eq!(
            composed.apply(a),
            phi.apply(psi.apply(a)),
            "compose must mean 'outer after inner' at atom {a}"
        );
    }
    assert_eq!(phi.iterate(0).image(), Transformation::identity(4).image());
    assert_eq!(phi.iterate(3).image(), phi.compose(&phi.compose(&phi)).image());
}

#[test]
fn nonsingularity_flags_mass_created_from_nothing() {
    use cwco::measure_space::FiniteMeasureSpace;
    let space = FiniteMeasureSpace::from_weights(vec![1.0, 0.0, 1.0]).expect("valid");
    // φ sends the heavy atom 2 onto the null atom 1: preimage of the null
    // set {1} has mass, so the pushforward is not absolutely continuous.
    let phi = Transformation::new(vec![0, 1, 1]).expect("in range");
    let report = is_nonsingular(&phi, &space);
    assert!(!report.nonsingular, "mass mapped onto a null atom must be flagged");
    assert!(
        rn_derivative_n(&phi, &space, 1).is_err(),
        "no density exists for a singular pushforward"
    );
}
