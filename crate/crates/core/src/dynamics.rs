//! Orbit experiments for conditional weighted composition operators: the
//! periodic-case boundedness obstruction, the necessary and sufficient
//! decay quantities behind the subspace-hypercyclicity criterion, a
//! Kitai-style three-bullet checker, transitivity witness search, direct
//! sums, and full-sequence mixing quantities.
//!
//! Everything here is horizon-bounded: a finite atomic space admits no
//! genuinely hypercyclic operator, so verdicts are always phrased as
//! consistency (or violation) of the criterion's inequalities along an
//! explicit finite schedule. Decay is decided by an explicit rule — a
//! least-squares geometric fit over the tail of the samples plus a hard
//! drop requirement — never by eyeballing.
//!
//! The quantities follow two conventions worth naming: a supremum over an
//! empty index set is `0` (the mass-gap column exposes how much of the
//! reference set was discarded to achieve that), and an exact zero of the
//! cocycle on a scheduled atom makes the inverse supremum undefined, which
//! is reported as a verdict (`undefined-at k`), not an error.

use serde::Serialize;

use crate::conditional::cond_exp;
use crate::error::{Error, Result};
use crate::measure_space::{
    is_coarser, is_measurable_with_tol, lp_norm, sup_norm_on, support, AtomSet,
    FiniteMeasureSpace, MeasFn, Partition,
};
use crate::operators::ConditionalWCO;
use crate::transform::{
    backward_compose_on, detect_period, finitely_nonmixing_witness,
    finitely_nonmixing_witness_backward, h_sharp_n_on, normal_profile, positive_inverse,
    pullback_partition, rn_derivative_n, rn_derivative_n_on, sigma_infinity,
};

/// Fitted geometric rates above this are not decay.
pub const DECAY_RATE_EDGE: f64 = 1.0 - 1e-3;

/// Decay additionally requires the last sample below this fraction of the
/// first.
pub const DECAY_DROP: f64 = 1e-2;

/// Tail norms below `TAIL_ZERO_TOL·(1+‖f‖)` count as already zero.
pub const TAIL_ZERO_TOL: f64 = 1e-12;

/// Relative tolerance for the right-inverse round-trip residual.
pub const KITAI_RESIDUAL_TOL: f64 = 1e-9;

/// Relative slack allowed when verifying orbit norms against a bound.
pub const ORBIT_SLACK_TOL: f64 = 1e-9;

/// Largest permutation period the orbit-bound precondition will resolve.
pub const PERIOD_CAP: usize = 4096;

/// The data a criterion evaluation runs along: a reference atom set `F`,
/// strictly increasing exponents `n_k`, and per-`k` subsets `V_k ⊆ F`.
#[derive(Debug, Clone)]
pub struct CriterionSchedule {
    f_set: AtomSet,
    n: Vec<usize>,
    v_sets: Vec<AtomSet>,
}

impl CriterionSchedule {
    /// Validates and stores a schedule.
    pub fn new(f_set: AtomSet, n: Vec<usize>, v_sets: Vec<AtomSet>) -> Result<Self> {
        if f_set.is_empty() {
            return Err(Error::InvalidInput("reference set F must be nonempty".into()));
        }
        if n.is_empty() {
            return Err(Error::InvalidInput("schedule needs at least one step".into()));
        }
        if n.len() != v_sets.len() {
            return Err(Error::InvalidInput(format!(
                "{} exponents but {} V-sets",
                n.len(),
                v_sets.len()
            )));
        }
        if n[0] == 0 {
            return Err(Error::InvalidInput("exponents start at 1".into()));
        }
        if n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "exponents must be strictly increasing".into(),
            ));
        }
        for (k, v) in v_sets.iter().enumerate() {
            if !v.is_subset(&f_set) {
                return Err(Error::InvalidInput(format!(
                    "V_{k} is not contained in F"
                )));
            }
        }
        Ok(Self { f_set, n, v_sets })
    }

    /// Default `V_k`: the positive atoms of `F` whose first `n_k` cocycle
    /// factors are all nonzero, so the inverse supremum is defined.
    pub fn auto_zero_free(
        t: &ConditionalWCO,
        f_set: AtomSet,
        n: Vec<usize>,
    ) -> Result<Self> {
        let space = t.space();
        if let Some(&max) = f_set.iter().next_back() {
            if max >= space.len() {
                return Err(Error::InvalidInput(format!(
                    "atom index {max} out of range for {} atoms",
                    space.len()
                )));
            }
        }
        let max_n = n.last().copied().unwrap_or(0);
        // first_zero[y] = least i with E(u|A)(φ^i y) = 0, if any i < max_n.
        let mut first_zero: Vec<Option<usize>> = Vec::new();
        for &y in &f_set {
            let mut hit = None;
            let mut cur = y;
            for i in 0..max_n {
                if t.eu().get(cur) == 0.0 {
                    hit = Some(i);
                    break;
                }
                cur = t.phi().apply(cur);
            }
            first_zero.push(hit);
        }
        let v_sets = n
            .iter()
            .map(|&n_k| {
                f_set
                    .iter()
                    .zip(&first_zero)
                    .filter(|&(&y, hit)| {
                        !space.is_null_atom(y) && hit.map_or(true, |i| i >= n_k)
                    })
                    .map(|(&y, _)| y)
                    .collect()
            })
            .collect();
        Self::new(f_set, n, v_sets)
    }

    /// The reference set `F`.
    pub fn f_set(&self) -> &AtomSet {
        &self.f_set
    }

    /// Number of schedule steps.
    pub fn len(&self) -> usize {
        self.n.len()
    }

    /// True when the schedule has no steps (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// The exponent sequence.
    pub fn n(&self) -> &[usize] {
        &self.n
    }

    /// The `k`-th subset `V_k`.
    pub fn v(&self, k: usize) -> &AtomSet {
        &self.v_sets[k]
    }

    /// Largest exponent.
    pub fn max_n(&self) -> usize {
        *self.n.last().expect("schedules are nonempty")
    }

    /// Per-`k` mass gap `μ(F) − μ(V_k)`.
    pub fn mass_gap(&self, space: &FiniteMeasureSpace) -> Vec<f64> {
        let f_mass = space.mass_of(&self.f_set);
        self.v_sets.iter().map(|v| f_mass - space.mass_of(v)).collect()
    }
}

/// Outcome of the geometric-decay decision rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted per-step geometric rate, when ≥ 3 finite positive samples
    /// exist.
    pub rate: Option<f64>,
    /// True when the rule declares decay.
    pub decays: bool,
}

/// Least-squares geometric fit of `(n, q)` samples with the decay rule:
/// fitted rate below [`DECAY_RATE_EDGE`] over the last half of the finite
/// positive samples *and* last sample below [`DECAY_DROP`] times the
/// first. A final sample of exactly `0` counts as decayed outright; zeros
/// and non-finite samples never enter the fit.
pub fn fit_decay(samples: &[(usize, f64)]) -> DecayFit {
    if let Some(&(_, last)) = samples.last() {
        if last == 0.0 {
            return DecayFit { rate: None, decays: true };
        }
    }
    let pos: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, q)| q.is_finite() && q > 0.0)
        .map(|&(n, q)| (n as f64, q))
        .collect();
    if pos.len() < 3 {
        return DecayFit { rate: None, decays: false };
    }
    let tail = &pos[pos.len() / 2..];
    let m = tail.len() as f64;
    let sx: f64 = tail.iter().map(|s| s.0).sum();
    let sy: f64 = tail.iter().map(|s| s.1.ln()).sum();
    let sxx: f64 = tail.iter().map(|s| s.0 * s.0).sum();
    let sxy: f64 = tail.iter().map(|s| s.0 * s.1.ln()).sum();
    let denom = m * sxx - sx * sx;
    if denom == 0.0 {
        return DecayFit { rate: None, decays: false };
    }
    let rate = ((m * sxy - sx * sy) / denom).exp();
    let dropped = pos.last().expect("nonempty").1 < pos.first().expect("nonempty").1 * DECAY_DROP;
    DecayFit { rate: Some(rate), decays: rate < DECAY_RATE_EDGE && dropped }
}

/// Joint decision over the two criterion quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Both quantities pass the decay rule.
    Decays,
    /// At least one quantity fails the decay rule.
    Stalls,
    /// The inverse supremum is undefined at step `k` (exact cocycle zero
    /// on a scheduled positive atom).
    UndefinedAt(usize),
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Decays => write!(f, "decays"),
            Verdict::Stalls => write!(f, "stalls"),
            Verdict::UndefinedAt(k) => write!(f, "undefined-at {k}"),
        }
    }
}

/// One schedule step of a decay evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    /// Step index.
    pub k: usize,
    /// Exponent `n_k`.
    pub n: usize,
    /// `μ(F) − μ(V_k)`.
    pub mass_gap: f64,
    /// Inverse-cocycle supremum over `V_k` (`∞` when undefined).
    pub q1: f64,
    /// The paired density-weighted supremum over `V_k`.
    pub q2: f64,
}

/// Per-step quantities, fitted rates, the joint verdict, and (for the
/// sufficient-side evaluation) the hypothesis report.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// One row per schedule step.
    pub rows: Vec<DecayRow>,
    /// Fit of `q1` against `n_k`.
    pub rate1: DecayFit,
    /// Fit of `q2` against `n_k`.
    pub rate2: DecayFit,
    /// Joint verdict.
    pub verdict: Verdict,
    /// Hypothesis flags, populated by the sufficient-side evaluation.
    pub hypotheses: Option<HypothesisReport>,
}

impl DecayReport {
    /// CSV rows `k,n_k,mass_gap,q1,q2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,n_k,mass_gap,q1,q2\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.k, r.n, r.mass_gap, r.q1, r.q2));
        }
        out
    }
}

/// Pass/fail record of the standing hypotheses behind the sufficient-side
/// criterion, plus informational mixing witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    /// `u` is nonzero on every positive atom.
    pub support_full: bool,
    /// `φ` maps null atoms to null atoms.
    pub normal: bool,
    /// `φ^{−1}A ⊆ A` (the operator's validity flag).
    pub pullback_invariant: bool,
    /// `A` sits inside the backward-limit partition of `φ`.
    pub within_sigma_infinity: bool,
    /// `max_{n ≤ horizon} ‖h_n^{A♯}‖_∞`, when `φ` is normal.
    pub h_sharp_sup: Option<f64>,
    /// Step after which forward images of `F` stop meeting `F`, when the
    /// image sequence provably closes up within the probed horizon.
    pub nonmixing_forward: Option<usize>,
    /// Backward variant, on preimages of `F`.
    pub nonmixing_backward: Option<usize>,
}

impl HypothesisReport {
    /// All four standing hypotheses hold and the forward-density sup is
    /// finite.
    pub fn all_pass(&self) -> bool {
        self.support_full
            && self.normal
            && self.pullback_invariant
            && self.within_sigma_infinity
            && self.h_sharp_sup.map_or(false, f64::is_finite)
    }
}

/// Evaluates the standing hypotheses for `t` along a schedule (the
/// schedule fixes the density horizon and the reference set for the
/// mixing witnesses).
pub fn hypothesis_report(t: &ConditionalWCO, schedule: &CriterionSchedule) -> HypothesisReport {
    let space = t.space();
    let phi = t.phi();
    let a = t.partition();
    let supp = support(t.u());
    let support_full = space.positive_atoms().all(|x| supp.contains(&x));
    let np = normal_profile(phi, space);
    let sinf = sigma_infinity(phi);
    let within_sigma_infinity = is_coarser(a, &sinf);
    let h_sharp_sup = if np.normal {
        let all: AtomSet = (0..space.len()).collect();
        let mut sup = 0.0f64;
        let mut ok = true;
        for n in 0..=schedule.max_n() {
            match h_sharp_n_on(phi, space, a, n) {
                Ok(h) => {
                    sup = sup.max(sup_norm_on(&h, &all, space).expect("indices in range"));
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        ok.then_some(sup)
    } else {
        None
    };
    let horizon = (2 * schedule.max_n()).max(1);
    HypothesisReport {
        support_full,
        normal: np.normal,
        pullback_invariant: t.is_valid(),
        within_sigma_infinity,
        h_sharp_sup,
        nonmixing_forward: finitely_nonmixing_witness(phi, schedule.f_set(), horizon),
        nonmixing_backward: finitely_nonmixing_witness_backward(phi, schedule.f_set(), horizon),
    }
}

/// `sup_{y ∈ v} 1/|w(y)|` with the empty-sup-is-zero convention; the flag
/// records an exact zero of `w` on `v` (the sup is then `∞`).
fn sup_inverse_cocycle(w: &MeasFn, v: &AtomSet) -> (f64, bool) {
    let mut sup = 0.0f64;
    let mut undefined = false;
    for &y in v {
        let val = w.get(y);
        if val == 0.0 {
            undefined = true;
            sup = f64::INFINITY;
        } else {
            sup = sup.max(1.0 / val.abs());
        }
    }
    (sup, undefined)
}

fn check_f_set(schedule: &CriterionSchedule, space: &FiniteMeasureSpace) -> Result<()> {
    if let Some(&max) = schedule.f_set().iter().next_back() {
        if max >= space.len() {
            return Err(Error::InvalidInput(format!(
                "schedule references atom index {max}, space has {} atoms",
                space.len()
            )));
        }
    }
    Ok(())
}

fn finish_report(
    rows: Vec<DecayRow>,
    undefined_at: Option<usize>,
    hypotheses: Option<HypothesisReport>,
) -> DecayReport {
    let s1: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.q1)).collect();
    let s2: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.q2)).collect();
    let rate1 = fit_decay(&s1);
    let rate2 = fit_decay(&s2);
    let verdict = match undefined_at {
        Some(k) => Verdict::UndefinedAt(k),
        None if rate1.decays && rate2.decays => Verdict::Decays,
        None => Verdict::Stalls,
    };
    DecayReport { rows, rate1, rate2, verdict, hypotheses }
}

/// Necessary-side quantities: `q1(k) = sup_{V_k} |w_{n_k}|^{−1}` and
/// `q2(k) = sup_{V_k} (h^A_{n_k})^{1/p} · |E(w_{n_k} | φ^{−n_k}A)∘φ^{−n_k}|`,
/// with the blockwise density taken on the space restricted to `A`.
///
/// Needs `φ` to restrict to a bijection of the positive atoms so the
/// backward composition is pointwise.
pub fn necessary_quantities(
    t: &ConditionalWCO,
    schedule: &CriterionSchedule,
) -> Result<DecayReport> {
    let space = t.space();
    let phi = t.phi();
    let a = t.partition();
    check_f_set(schedule, space)?;
    let inv = positive_inverse(phi, space).ok_or_else(|| {
        Error::Unsupported(
            "necessary-side quantities need φ to restrict to a bijection of the positive atoms"
                .into(),
        )
    })?;
    let f_mass = space.mass_of(schedule.f_set());
    let mut rows = Vec::with_capacity(schedule.len());
    let mut undefined_at = None;
    for (k, &n_k) in schedule.n().iter().enumerate() {
        let v_pos: AtomSet =
            schedule.v(k).iter().copied().filter(|&y| !space.is_null_atom(y)).collect();
        let w = t.cocycle(n_k).w;
        let (q1, undef) = sup_inverse_cocycle(&w, &v_pos);
        if undef && undefined_at.is_none() {
            undefined_at = Some(k);
        }
        let h_a = rn_derivative_n_on(phi, space, a, n_k)?;
        let e_w = cond_exp(&w, &pullback_partition(&phi.iterate(n_k), a), space);
        let mut q2 = 0.0f64;
        for &y in &v_pos {
            let mut x = y;
            for _ in 0..n_k {
                x = inv[x];
            }
            q2 = q2.max(h_a.get(y).powf(1.0 / t.p()) * e_w.get(x).abs());
        }
        rows.push(DecayRow {
            k,
            n: n_k,
            mass_gap: f_mass - space.mass_of(schedule.v(k)),
            q1,
            q2,
        });
    }
    Ok(finish_report(rows, undefined_at, None))
}

/// Sufficient-side quantities: the same `q1` and
/// `q2′(k) = sup_{V_k} h_{n_k}^{1/p} · |w_{n_k}∘φ^{−n_k}|`, plus the
/// hypothesis report.
///
/// The backward composition walks mass-carrying preimages and therefore
/// tolerates partially defined inverses; a genuinely multi-valued pullback
/// on `V_k` errors.
pub fn sufficient_quantities(
    t: &ConditionalWCO,
    schedule: &CriterionSchedule,
) -> Result<DecayReport> {
    let space = t.space();
    let phi = t.phi();
    check_f_set(schedule, space)?;
    let f_mass = space.mass_of(schedule.f_set());
    let mut rows = Vec::with_capacity(schedule.len());
    let mut undefined_at = None;
    for (k, &n_k) in schedule.n().iter().enumerate() {
        let v_pos: AtomSet =
            schedule.v(k).iter().copied().filter(|&y| !space.is_null_atom(y)).collect();
        let w = t.cocycle(n_k).w;
        let (q1, undef) = sup_inverse_cocycle(&w, &v_pos);
        if undef && undefined_at.is_none() {
            undefined_at = Some(k);
        }
        let h_n = rn_derivative_n(phi, space, n_k)?;
        let back = backward_compose_on(phi, space, &w, n_k, &v_pos)?;
        let mut q2 = 0.0f64;
        for (y, wb) in back {
            q2 = q2.max(h_n.get(y).powf(1.0 / t.p()) * wb.abs());
        }
        rows.push(DecayRow {
            k,
            n: n_k,
            mass_gap: f_mass - space.mass_of(schedule.v(k)),
            q1,
            q2,
        });
    }
    let hyp = hypothesis_report(t, schedule);
    Ok(finish_report(rows, undefined_at, Some(hyp)))
}

/// Full-sequence variant of [`sufficient_quantities`]: the schedule is
/// `n_k = k` for `k = 1..=n_max` with the zero-free default `V_k`.
pub fn topmix_quantities(
    t: &ConditionalWCO,
    f_set: &AtomSet,
    n_max: usize,
) -> Result<DecayReport> {
    if n_max == 0 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    let schedule = CriterionSchedule::auto_zero_free(t, f_set.clone(), (1..=n_max).collect())?;
    sufficient_quantities(t, &schedule)
}

/// Successive powers `Tⁿf` for `n = 0..=n_max`, with their norms.
#[derive(Debug, Clone)]
pub struct Orbit {
    /// `‖Tⁿf‖_p` for `n = 0..=n_max`.
    pub norms: Vec<f64>,
    /// The orbit vectors themselves.
    pub vectors: Vec<MeasFn>,
}

impl Orbit {
    /// CSV rows `n,norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,norm\n");
        for (n, norm) in self.norms.iter().enumerate() {
            out.push_str(&format!("{n},{norm}\n"));
        }
        out
    }
}

/// Computes the orbit of `f` under `t` by iterative application.
pub fn orbit(t: &ConditionalWCO, f: &MeasFn, n_max: usize) -> Orbit {
    let mut vectors = Vec::with_capacity(n_max + 1);
    let mut norms = Vec::with_capacity(n_max + 1);
    vectors.push(f.clone());
    norms.push(lp_norm(f, t.p(), t.space()).expect("validated p"));
    for _ in 1..=n_max {
        let next = t.apply(vectors.last().expect("nonempty"));
        norms.push(lp_norm(&next, t.p(), t.space()).expect("validated p"));
        vectors.push(next);
    }
    Orbit { norms, vectors }
}

/// Outcome of the periodic-case orbit bound.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodicBound {
    /// The theorem applies: the printed bound, whether the swept orbit
    /// respects it, and the worst slack `bound − ‖Tⁿf‖` seen.
    Bounded {
        /// Permutation period `m`.
        period: usize,
        /// `‖f‖_p · max{1, ‖J‖_∞^{1/p}, …, ‖J‖_∞^{(m−1)/p}}`.
        bound: f64,
        /// All swept orbit norms stayed within the bound (up to
        /// [`ORBIT_SLACK_TOL`]).
        verified: bool,
        /// `min_n (bound − ‖Tⁿf‖)`; negative means the bound was broken.
        worst_slack: f64,
    },
    /// The period exists but `‖w_m‖_∞ > 1`, so the theorem's hypothesis
    /// fails; carries the offending value.
    CocycleTooLarge {
        /// Permutation period `m`.
        period: usize,
        /// `‖w_m‖_∞`.
        w_sup: f64,
    },
}

/// Boundedness obstruction for periodic `φ`: when `φ^m = id`,
/// `φ^{−1}A ⊆ A`, and `‖w_m‖_∞ ≤ 1`, every orbit of `T` is bounded by
/// `B = ‖f‖_p·max{1, ‖J‖_∞^{1/p}, …, ‖J‖_∞^{(m−1)/p}}`; the sweep verifies
/// this against `n ≤ horizon`.
///
/// Errors when `φ` is aperiodic (or the period exceeds [`PERIOD_CAP`]) and
/// when the validity flag is false — the bound is a theorem only under
/// `φ^{−1}A ⊆ A`, and counterexamples exist without it.
pub fn periodic_orbit_bound(
    t: &ConditionalWCO,
    f: &MeasFn,
    horizon: usize,
) -> Result<PeriodicBound> {
    if !t.is_valid() {
        return Err(Error::Unsupported(
            "the periodic orbit bound needs φ^{−1}A ⊆ A; this operator's projection \
             partition is not pullback-invariant"
                .into(),
        ));
    }
    let period = detect_period(t.phi(), PERIOD_CAP).ok_or_else(|| {
        Error::Unsupported(format!(
            "no permutation period within {PERIOD_CAP}; the orbit bound needs periodic φ"
        ))
    })?;
    let w_m = t.cocycle(period).w;
    let positive: AtomSet = t.space().positive_atoms().collect();
    let w_sup = sup_norm_on(&w_m, &positive, t.space()).expect("indices in range");
    if w_sup > 1.0 {
        return Ok(PeriodicBound::CocycleTooLarge { period, w_sup });
    }
    let (_, j_bound) = t.bound_j()?;
    let factor = (0..period).map(|e| j_bound.powi(e as i32)).fold(1.0f64, f64::max);
    let bound = lp_norm(f, t.p(), t.space()).expect("validated p") * factor;
    let orb = orbit(t, f, horizon);
    let worst_slack = orb.norms.iter().map(|&s| bound - s).fold(f64::INFINITY, f64::min);
    let verified = orb.norms.iter().all(|&s| s <= bound * (1.0 + ORBIT_SLACK_TOL));
    Ok(PeriodicBound::Bounded { period, bound, verified, worst_slack })
}

/// One criterion bullet that failed, with a human-readable witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KitaiViolation {
    /// Which bullet (1: forward tails, 2: right-inverse sequence, 3:
    /// subspace invariance).
    pub bullet: u8,
    /// What broke, naming the offending net member.
    pub witness: String,
}

/// Aggregate outcome of [`kitai_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KitaiVerdict {
    /// All three bullets hold along the schedule for every net member.
    Consistent,
    /// At least one bullet failed; carries the first violation.
    Violated(KitaiViolation),
}

/// Per-net-member outcome of the three-bullet check.
#[derive(Debug, Clone, Serialize)]
pub struct KitaiRow {
    /// Index into the net.
    pub member: usize,
    /// `‖T^{n_K}f‖_p` at the last schedule step.
    pub tail_final: f64,
    /// Bullet 1 for this member.
    pub tail_decays: bool,
    /// Bullet 3 for this member (exact block-constancy of every scheduled
    /// power).
    pub invariant: bool,
    /// `‖x_K‖_p` at the last step, when the inverses all exist.
    pub inverse_final: Option<f64>,
    /// Whether the inverse norms decay.
    pub inverse_decays: Option<bool>,
    /// Largest round-trip residual `‖T^{n_k}x_k − f‖_p`.
    pub max_residual: Option<f64>,
    /// Error text when the right inverse failed at some step.
    pub note: String,
}

/// Full report of the three-bullet criterion check.
#[derive(Debug, Clone, Serialize)]
pub struct KitaiReport {
    /// Net size the check ran over.
    pub net_size: usize,
    /// Per-member outcomes.
    pub rows: Vec<KitaiRow>,
    /// Every violation found, in discovery order.
    pub violations: Vec<KitaiViolation>,
    /// Consistent, or the first violation.
    pub verdict: KitaiVerdict,
}

impl KitaiReport {
    /// CSV rows, one per net member.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "member,tail_final,tail_decays,invariant,inverse_final,inverse_decays,max_residual,note\n",
        );
        for r in &self.rows {
            let opt = |v: &Option<f64>| v.map_or(String::new(), |x| x.to_string());
            let optb = |v: &Option<bool>| v.map_or(String::new(), |x| x.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.member,
                r.tail_final,
                r.tail_decays,
                r.invariant,
                opt(&r.inverse_final),
                optb(&r.inverse_decays),
                opt(&r.max_residual),
                r.note.replace(',', ";"),
            ));
        }
        out
    }
}

/// Three-bullet criterion check over a finite net of test functions:
/// scheduled powers of every member must decay (or be outright zero),
/// right inverses `x_k` must exist with decaying norms, exact subspace
/// membership, and round-trip residual within [`KITAI_RESIDUAL_TOL`], and
/// every scheduled power must stay exactly block-constant.
///
/// Right-inverse failures are recorded as bullet-2 violations, never
/// thrown.
pub fn kitai_check(
    t: &ConditionalWCO,
    net: &[MeasFn],
    schedule: &CriterionSchedule,
) -> KitaiReport {
    let a = t.partition();
    let ks = schedule.n();
    let max_n = schedule.max_n();
    let mut rows = Vec::with_capacity(net.len());
    let mut violations: Vec<KitaiViolation> = Vec::new();
    for (member, f) in net.iter().enumerate() {
        let base = lp_norm(f, t.p(), t.space()).expect("validated p");
        // Bullets 1 and 3 along one incremental power sweep.
        let mut tail: Vec<(usize, f64)> = Vec::with_capacity(ks.len());
        let mut invariant = true;
        let mut cur = f.clone();
        let mut next_k = 0usize;
        for step in 1..=max_n {
            cur = t.apply(&cur);
            if next_k < ks.len() && step == ks[next_k] {
                tail.push((step, lp_norm(&cur, t.p(), t.space()).expect("validated p")));
                if invariant && !is_measurable_with_tol(&cur, a, 0.0) {
                    invariant = false;
                    violations.push(KitaiViolation {
                        bullet: 3,
                        witness: format!(
                            "net member {member}: T^{step} output is not block-constant"
                        ),
                    });
                }
                next_k += 1;
            }
        }
        let all_tiny = tail.iter().all(|&(_, s)| s <= TAIL_ZERO_TOL * (1.0 + base));
        let tail_fit = fit_decay(&tail);
        let tail_decays = all_tiny || tail_fit.decays;
        if !tail_decays {
            violations.push(KitaiViolation {
                bullet: 1,
                witness: format!(
                    "net member {member}: scheduled power norms do not decay (final {:.3e}, \
                     fitted rate {})",
                    tail.last().map_or(0.0, |&(_, s)| s),
                    tail_fit.rate.map_or("n/a".to_string(), |r| format!("{r:.3}")),
                ),
            });
        }
        // Bullet 2: the right-inverse sequence for this member as target.
        let mut inverse_final = None;
        let mut inverse_decays = None;
        let mut max_residual = None;
        let mut note = String::new();
        let mut x_norms: Vec<(usize, f64)> = Vec::with_capacity(ks.len());
        let mut worst_res = 0.0f64;
        let mut failed = false;
        for &n_k in ks {
            match t.right_inverse(f, n_k) {
                Ok(x) => {
                    let xn = lp_norm(&x, t.p(), t.space()).expect("validated p");
                    x_norms.push((n_k, xn));
                    if !is_measurable_with_tol(&x, a, 0.0) {
                        violations.push(KitaiViolation {
                            bullet: 2,
                            witness: format!(
                                "net member {member}: the step-{n_k} inverse is not \
                                 block-constant, so it leaves the subspace"
                            ),
                        });
                        note = format!("inverse at step {n_k} leaves the subspace");
                        failed = true;
                        break;
                    }
                    let back = t.power_iterative(n_k, &x);
                    let res =
                        lp_norm(&back.sub(f), t.p(), t.space()).expect("validated p");
                    worst_res = worst_res.max(res);
                    if res > KITAI_RESIDUAL_TOL * (1.0 + base) {
                        violations.push(KitaiViolation {
                            bullet: 2,
                            witness: format!(
                                "net member {member}: round-trip residual {res:.3e} at step \
                                 {n_k} exceeds tolerance"
                            ),
                        });
                        note = format!("round-trip residual {res:.3e} at step {n_k}");
                        failed = true;
                        break;
                    }
                }
                Err(e) => {
                    violations.push(KitaiViolation {
                        bullet: 2,
                        witness: format!("net member {member}: no inverse at step {n_k} ({e})"),
                    });
                    note = format!("no inverse at step {n_k}: {e}");
                    failed = true;
                    break;
                }
            }
        }
        if !failed {
            let all_tiny = x_norms.iter().all(|&(_, s)| s <= TAIL_ZERO_TOL * (1.0 + base));
            let fit = fit_decay(&x_norms);
            let decays = all_tiny || fit.decays;
            if !decays {
                violations.push(KitaiViolation {
                    bullet: 2,
                    witness: format!(
                        "net member {member}: inverse norms do not decay (final {:.3e})",
                        x_norms.last().map_or(0.0, |&(_, s)| s)
                    ),
                });
            }
            inverse_final = x_norms.last().map(|&(_, s)| s);
            inverse_decays = Some(decays);
            max_residual = Some(worst_res);
        }
        rows.push(KitaiRow {
            member,
            tail_final: tail.last().map_or(0.0, |&(_, s)| s),
            tail_decays,
            invariant,
            inverse_final,
            inverse_decays,
            max_residual,
            note,
        });
    }
    let verdict = match violations.first() {
        None => KitaiVerdict::Consistent,
        Some(v) => KitaiVerdict::Violated(v.clone()),
    };
    KitaiReport { net_size: net.len(), rows, violations, verdict }
}

/// A successful transitivity search step.
#[derive(Debug, Clone)]
pub struct TransitivityWitness {
    /// Power at which the orbit lands.
    pub n: usize,
    /// The witness function.
    pub f: MeasFn,
    /// `‖f − center_V‖_p`.
    pub dist_start: f64,
    /// `‖Tⁿf − center_U‖_p`.
    pub dist_end: f64,
}

/// Searches for `f` within `ε` of `center_v` whose `n`-th image lands
/// within `ε` of `center_u`, for some scheduled `n ≤ n_max`.
///
/// Candidates follow the constructive recipe
/// `f = center_v·χ_{V_k} + D^{n_k}(center_u·χ_{V_k})` (with `D` the right
/// inverse), except at `n = 0` where the midpoint is tried. Every
/// candidate is validated directly by iterative application, so absence
/// of a witness is a genuine search outcome, not a modeling assumption;
/// steps whose right inverse fails are skipped.
pub fn transitivity_witness(
    t: &ConditionalWCO,
    center_u: &MeasFn,
    center_v: &MeasFn,
    eps: f64,
    schedule: &CriterionSchedule,
    n_max: usize,
) -> Result<Option<TransitivityWitness>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!("radius ε = {eps}; need ε > 0")));
    }
    if center_u.len() != t.space().len() || center_v.len() != t.space().len() {
        return Err(Error::InvalidInput("center/space length mismatch".into()));
    }
    let p = t.p();
    let space = t.space();
    let half_gap = lp_norm(&center_u.sub(center_v), p, space)? / 2.0;
    if half_gap < eps {
        let mid = center_u.add(center_v).scale(0.5);
        return Ok(Some(TransitivityWitness {
            n: 0,
            f: mid,
            dist_start: half_gap,
            dist_end: half_gap,
        }));
    }
    for (k, &n_k) in schedule.n().iter().enumerate() {
        if n_k > n_max {
            break;
        }
        let mask = MeasFn::indicator(schedule.v(k), space.len());
        let g_v = center_v.mul(&mask);
        let g_u = center_u.mul(&mask);
        let Ok(x) = t.right_inverse(&g_u, n_k) else { continue };
        let f = g_v.add(&x);
        let dist_start = lp_norm(&f.sub(center_v), p, space)?;
        if dist_start >= eps {
            continue;
        }
        let dist_end = lp_norm(&t.power_iterative(n_k, &f).sub(center_u), p, space)?;
        if dist_end < eps {
            return Ok(Some(TransitivityWitness { n: n_k, f, dist_start, dist_end }));
        }
    }
    Ok(None)
}

/// `T ⊕ T` on two tagged copies of the space: ids gain `0:`/`1:` prefixes
/// and the partition, map, and weight act coordinatewise.
pub fn direct_sum(t: &ConditionalWCO) -> ConditionalWCO {
    let space = t.space();
    let n = space.len();
    let ids = (0..2 * n)
        .map(|i| format!("{}:{}", i / n, space.id(i % n)))
        .collect();
    let weights = space.weights().iter().chain(space.weights()).copied().collect();
    let doubled_space =
        FiniteMeasureSpace::new(ids, weights).expect("tagged ids are distinct");
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for offset in [0, n] {
        for block in t.partition().blocks() {
            blocks.push(block.iter().map(|&x| x + offset).collect());
        }
    }
    let a = Partition::new(2 * n, blocks).expect("copies partition the doubled space");
    let image = (0..2 * n).map(|i| t.phi().apply(i % n) + (i / n) * n).collect();
    let phi = crate::transform::Transformation::new(image).expect("in range");
    let u = MeasFn::new(t.u().values().iter().chain(t.u().values()).copied().collect())
        .expect("finite values");
    ConditionalWCO::new(doubled_space, a, phi, u, t.p())
        .expect("the doubled instance is well-formed")
}

/// Embeds a pair of functions as one function on the doubled space.
pub fn direct_sum_fn(f: &MeasFn, g: &MeasFn) -> MeasFn {
    MeasFn::new(f.values().iter().chain(g.values()).copied().collect())
        .expect("finite values")
}
