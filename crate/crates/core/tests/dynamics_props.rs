//! Property tests for the dynamics layer: decay fitting, scheduled
//! quantities, the periodic orbit bound, the three-bullet criterion
//! check, and the doubled operator.

use cwco::dynamics::{
    direct_sum, direct_sum_fn, fit_decay, kitai_check, orbit, periodic_orbit_bound,
    sufficient_quantities, topmix_quantities, transitivity_witness, CriterionSchedule,
    KitaiVerdict, PeriodicBound, Verdict,
};
use cwco::measure_space::{
    lp_norm, simple_net, sup_norm_on, AtomSet, FiniteMeasureSpace, MeasFn, Partition,
};
use cwco::operators::ConditionalWCO;
use cwco::sampling::{
    random_fn, random_invariant_permutation_parts, random_positive_fn, rng_from_seed,
};
use cwco::transform::{detect_period, Transformation};
use proptest::prelude::*;

/// Uniform cycle of length `n` with weight 2 on the first half and 1/2 on
/// the second half, discrete projection: cocycle products along any orbit
/// shrink once the window covers both halves.
fn decaying_cycle(n: usize, p: f64) -> ConditionalWCO {
    assert!(n % 2 == 0, "halves must be exact");
    let space = FiniteMeasureSpace::from_weights(vec![1.0; n]).expect("valid");
    let a = Partition::discrete(n);
    let phi = Transformation::new((0..n).map(|i| (i + 1) % n).collect()).expect("in range");
    let u = MeasFn::new(
        (0..n).map(|i| if i < n / 2 { 2.0 } else { 0.5 }).collect(),
    )
    .expect("finite");
    ConditionalWCO::new(space, a, phi, u, p).expect("well-formed")
}

#[test]
fn decay_fit_recovers_exact_geometric_rates() {
    let samples: Vec<(usize, f64)> = (1..=12).map(|n| (n, 0.5f64.powi(n as i32))).collect();
    let fit = fit_decay(&samples);
    assert!(fit.decays, "a clean geometric sequence must be classified as decaying");
    let rate = fit.rate.expect("enough finite samples");
    assert!(
        (rate - 0.5).abs() <= 1e-9,
        "least squares on exact data must recover the rate, got {rate}"
    );
    let flat: Vec<(usize, f64)> = (1..=12).map(|n| (n, 3.0)).collect();
    let stalled = fit_decay(&flat);
    assert!(!stalled.decays, "a constant sequence must not be classified as decaying");
    assert!(
        (stalled.rate.expect("finite samples") - 1.0).abs() <= 1e-9,
        "a constant sequence has unit rate"
    );
    let short = fit_decay(&[(1, 0.5)]);
    assert!(short.rate.is_none() && !short.decays, "one sample cannot decay");
}

#[test]
fn scheduled_quantities_match_hand_computed_powers_of_two() {
    // On the decaying 8-cycle, w_n(x) multiplies n consecutive weights;
    // full laps multiply to 1, so q1(8) = 1 and q2′ reuses the same
    // products (h ≡ 1 for a measure-preserving permutation).
    let t = decaying_cycle(8, 2.0);
    let f_set: AtomSet = [0usize].into_iter().collect();
    let schedule =
        CriterionSchedule::auto_zero_free(&t, f_set, (1..=8).collect()).expect("valid");
    let report = sufficient_quantities(&t, &schedule).expect("nonsingular");
    for row in &report.rows {
        // From atom 0 the first 4 factors are 2, the next 4 are 1/2:
        // w_n(0) = 2^min(n,4)·(1/2)^max(n−4,0), so q1 = 1/w_n(0).
        let w = 2.0f64.powi(row.n.min(4) as i32) * 0.5f64.powi(row.n.saturating_sub(4) as i32);
        assert_eq!(
            row.q1,
            1.0 / w,
            "q1 at n = {} must invert the cocycle product",
            row.n
        );
        // Backward from atom 0 the factors are 1/2 then 2: w_n∘φ^{−n}(0)
        // = (1/2)^min(n,4)·2^max(n−4,0).
        let wb = 0.5f64.powi(row.n.min(4) as i32) * 2.0f64.powi(row.n.saturating_sub(4) as i32);
        assert!(
            (row.q2 - wb).abs() <= 1e-12 * (1.0 + wb),
            "q2′ at n = {} must be the backward product {wb}, got {}",
            row.n,
            row.q2
        );
    }
}

#[test]
fn topmix_agrees_with_the_explicit_full_schedule() {
    let t = decaying_cycle(12, 2.0);
    let f_set: AtomSet = [0usize, 1].into_iter().collect();
    let via_topmix = topmix_quantities(&t, &f_set, 6).expect("nonsingular");
    let schedule = CriterionSchedule::auto_zero_free(&t, f_set, (1..=6).collect())
        .expect("valid");
    let direct = sufficient_quantities(&t, &schedule).expect("nonsingular");
    assert_eq!(via_topmix.rows.len(), direct.rows.len());
    for (a, b) in via_topmix.rows.iter().zip(&direct.rows) {
        assert_eq!(a.q1.to_bits(), b.q1.to_bits(), "same schedule, same q1");
        assert_eq!(a.q2.to_bits(), b.q2.to_bits(), "same schedule, same q2′");
    }
}

#[test]
fn zero_weight_orbits_are_flagged_undefined() {
    let space = FiniteMeasureSpace::from_weights(vec![1.0; 4]).expect("valid");
    let a = Partition::discrete(4);
    let phi = Transformation::new(vec![1, 2, 3, 0]).expect("in range");
    let u = MeasFn::new(vec![1.0, 0.0, 1.0, 1.0]).expect("finite");
    let t = ConditionalWCO::new(space, a, phi, u, 2.0).expect("well-formed");
    let f_set: AtomSet = (0..4).collect();
    // Hand-built V sets that ignore the zero at atom 1: q1 is then a
    // supremum of 1/0 and the verdict must report the undefined step.
    let schedule = CriterionSchedule::new(
        f_set.clone(),
        vec![2],
        vec![f_set.clone()],
    )
    .expect("valid");
    let report = sufficient_quantities(&t, &schedule).expect("nonsingular");
    assert_eq!(
        report.verdict,
        Verdict::UndefinedAt(0),
        "an exactly-zero cocycle inside V must surface as undefined"
    );
    // The zero-free constructor prunes those orbits instead.
    let pruned = CriterionSchedule::auto_zero_free(&t, f_set, vec![2]).expect("valid");
    assert!(
        !pruned.v(0).contains(&0) && !pruned.v(0).contains(&1),
        "orbits running through the zero within 2 steps must be pruned"
    );
    assert!(
        pruned.v(0).contains(&3),
        "atoms whose first 2 factors are nonzero must survive"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn periodic_orbits_respect_the_printed_bound(seed in 0u64..200) {
        let mut rng = rng_from_seed(seed);
        let (space, phi, a) = random_invariant_permutation_parts(&mut rng, 12, 4);
        let m = detect_period(&phi, 64).expect("permutations are periodic");
        let raw = random_positive_fn(&mut rng, space.len(), 0.2, 2.0);
        let probe = ConditionalWCO::new(space.clone(), a.clone(), phi.clone(), raw.clone(), 2.0)
            .expect("well-formed");
        let w_m = probe.cocycle(m).w;
        let positive: AtomSet = space.positive_atoms().collect();
        let w_sup = sup_norm_on(&w_m, &positive, &space).expect("indices valid");
        // Normalize so ‖w_m‖_∞ ≤ 1, putting the instance inside the
        // theorem's hypothesis.
        let u = raw.scale(1.0 / (w_sup.powf(1.0 / m as f64) * (1.0 + 1e-9)));
        let t = ConditionalWCO::new(space.clone(), a, phi, u, 2.0).expect("well-formed");
        let f = random_fn(&mut rng, space.len(), 2.0);
        match periodic_orbit_bound(&t, &f, 100).expect("periodic and valid") {
            PeriodicBound::Bounded { verified, worst_slack, .. } => {
                prop_assert!(
                    verified && worst_slack >= -1e-9,
                    "orbit left the bound (worst slack {worst_slack})"
                );
            }
            PeriodicBound::CocycleTooLarge { w_sup, .. } => {
                prop_assert!(
                    w_sup <= 1.0 + 1e-6,
                    "normalization should have tamed the cocycle, got {w_sup}"
                );
            }
        }
    }

    #[test]
    fn doubled_operator_acts_coordinatewise(seed in 0u64..200, n in 0usize..5) {
        let mut rng = rng_from_seed(seed);
        let t = cwco::sampling::random_valid_instance(&mut rng, 10, 2.0);
        let tt = direct_sum(&t);
        prop_assert_eq!(tt.space().len(), 2 * t.space().len());
        prop_assert!(tt.is_valid(), "doubling preserves pullback invariance");
        let f = random_fn(&mut rng, t.space().len(), 2.0);
        let g = random_fn(&mut rng, t.space().len(), 2.0);
        let joint = tt.power_iterative(n, &direct_sum_fn(&f, &g));
        let left = t.power_iterative(n, &f);
        let right = t.power_iterative(n, &g);
        let expected = direct_sum_fn(&left, &right);
        for x in 0..tt.space().len() {
            prop_assert!(
                (joint.get(x) - expected.get(x)).abs()
                    <= 1e-12 * (1.0 + expected.get(x).abs()),
                "(T⊕T)ⁿ must act coordinatewise at atom {x}"
            );
        }
    }

    #[test]
    fn orbit_norms_start_at_the_function_norm(seed in 0u64..200) {
        let mut rng = rng_from_seed(seed);
        let t = cwco::sampling::random_valid_instance(&mut rng, 12, 2.0);
        let f = random_fn(&mut rng, t.space().len(), 2.0);
        let orb = orbit(&t, &f, 6);
        prop_assert_eq!(orb.norms.len(), 7);
        prop_assert_eq!(orb.vectors.len(), 7);
        let nf = lp_norm(&f, 2.0, t.space()).expect("valid p");
        prop_assert_eq!(orb.norms[0].to_bits(), nf.to_bits());
        for (n, v) in orb.vectors.iter().enumerate() {
            let direct = t.power_iterative(n, &f);
            prop_assert_eq!(v.values(), direct.values(), "orbit vector {} drifted", n);
        }
    }
}

#[test]
fn criterion_check_accepts_the_decaying_cycle() {
    // Schedule strictly inside the half-lap: forward products from atom 0
    // are 2ⁿ (inverses shrink) while backward products are 2⁻ⁿ (tails
    // shrink), and the 12-step window drops both by far more than the
    // hundredfold the decay rule demands.
    let t = decaying_cycle(32, 2.0);
    let f_set: AtomSet = [0usize].into_iter().collect();
    let schedule = CriterionSchedule::auto_zero_free(&t, f_set, (1..=12).collect())
        .expect("valid");
    let net: Vec<MeasFn> = [-1.0, 0.0, 1.0]
        .iter()
        .map(|&c| MeasFn::indicator(schedule.f_set(), 32).scale(c))
        .collect();
    let report = kitai_check(&t, &net, &schedule);
    assert_eq!(
        report.verdict,
        KitaiVerdict::Consistent,
        "the decaying cycle satisfies all three bullets: {:?}",
        report.violations
    );
    assert_eq!(report.net_size, net.len());
    assert_eq!(report.rows.len(), net.len());
    for row in &report.rows {
        assert_eq!(
            row.max_residual,
            Some(0.0),
            "power-of-two weights make the inverse round-trip exact"
        );
    }
}

#[test]
fn criterion_check_rejects_a_growing_weight() {
    // Constant weight 2 on a cycle: tails grow as 2ⁿ, breaking the first
    // bullet for every nonzero net member.
    let space = FiniteMeasureSpace::from_weights(vec![1.0; 4]).expect("valid");
    let a = Partition::discrete(4);
    let phi = Transformation::new(vec![1, 2, 3, 0]).expect("in range");
    let u = MeasFn::constant(2.0, 4).expect("finite");
    let t = ConditionalWCO::new(space, a, phi, u, 2.0).expect("well-formed");
    let f_set: AtomSet = (0..4).collect();
    let schedule =
        CriterionSchedule::auto_zero_free(&t, f_set, vec![2, 4, 6]).expect("valid");
    let net = simple_net(t.partition(), &[0.0, 1.0], 1, 4096).expect("small net");
    let report = kitai_check(&t, &net, &schedule);
    match report.verdict {
        KitaiVerdict::Violated(v) => {
            assert_eq!(v.bullet, 1, "growing tails violate the first bullet");
        }
        KitaiVerdict::Consistent => panic!("doubling weights cannot pass the tail check"),
    }
}

#[test]
fn transitivity_search_finds_midpoints_and_respects_isometries() {
    let t = decaying_cycle(8, 2.0);
    let f_set: AtomSet = (0..8).collect();
    let schedule = CriterionSchedule::auto_zero_free(&t, f_set, (1..=16).collect())
        .expect("valid");
    let c = MeasFn::constant(1.0, 8).expect("finite");
    // Huge radius: the midpoint between the centers already qualifies.
    let hit = transitivity_witness(&t, &c, &c.scale(1.1), 10.0, &schedule, 16)
        .expect("well-posed search")
        .expect("a fat ball must contain a witness");
    assert_eq!(hit.n, 0, "overlapping balls are witnessed by the midpoint");

    // Isometric rotation (u ≡ 1): every orbit keeps its norm, so a ball
    // around 0 can never reach a ball around a far-away center.
    let space = FiniteMeasureSpace::from_weights(vec![1.0; 8]).expect("valid");
    let a = Partition::discrete(8);
    let phi = Transformation::new((0..8).map(|i| (i + 1) % 8).collect()).expect("in range");
    let iso = ConditionalWCO::new(space, a, phi, MeasFn::constant(1.0, 8).expect("finite"), 2.0)
        .expect("well-formed");
    let f_set: AtomSet = (0..8).collect();
    let sched = CriterionSchedule::auto_zero_free(&iso, f_set, (1..=32).collect())
        .expect("valid");
    let zero = MeasFn::zero(8);
    let far = MeasFn::constant(4.0, 8).expect("finite");
    let gap = lp_norm(&far.sub(&zero), 2.0, iso.space()).expect("valid p");
    let absent = transitivity_witness(&iso, &far, &zero, 0.1 * gap, &sched, 32)
        .expect("well-posed search");
    assert!(
        absent.is_none(),
        "an isometry cannot carry a small ball at 0 into a distant ball"
    );
}

#[test]
fn schedules_reject_malformed_inputs() {
    let f: AtomSet = [0usize, 1].into_iter().collect();
    assert!(
        CriterionSchedule::new(AtomSet::new(), vec![1], vec![AtomSet::new()]).is_err(),
        "empty F must be rejected"
    );
    assert!(
        CriterionSchedule::new(f.clone(), vec![1, 1], vec![f.clone(), f.clone()]).is_err(),
        "non-increasing exponents must be rejected"
    );
    assert!(
        CriterionSchedule::new(f.clone(), vec![1], vec![[7usize].into_iter().collect()])
            .is_err(),
        "V outside F must be rejected"
    );
}
