//! The conditional weighted composition operator `T f = E(u · f∘φ | A)`
//! acting on `L^p` of a finite atomic space: application, powers and their
//! closed forms, the multiplicative cocycle, operator norms, and a partial
//! right inverse.
//!
//! The operator multiplies by a weight `u`, composes with a transformation
//! `φ`, and projects onto the block-constant functions of a partition `A`.
//! Its closed-form power identities hold only when `A` pulls back into
//! itself (`φ^{−1}A ⊆ A`); that condition is computed once at construction
//! and exposed as the *validity flag*. Iterated application itself never
//! needs the flag — only the closed forms and the bound/inversion theorems
//! that quote them do.
//!
//! Norm machinery works through the fiber functional
//! `J(b) = Σ_{φ(a)=b} μ(a)|u(a)|^p / μ(b)`, whose essential sup to the
//! `1/p` gives the exact norm of the *unprojected* weighted composition;
//! the projection can only shrink norms, so the same number is an upper
//! bound for `T`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::conditional::cond_exp;
use crate::error::{Error, Result};
use crate::measure_space::{
    is_measurable, lp_norm, rel_dev, sup_norm_on, FiniteMeasureSpace, MeasFn, Partition,
};
use crate::transform::{is_nonsingular, positive_inverse, pullback_partition, Transformation};

/// Relative tolerance for the iterative/closed-form power cross-check.
pub const POWER_XCHECK_TOL: f64 = 1e-9;

/// Atom-count cap for dense spectral computations.
pub const P2_EXACT_MAX_ATOMS: usize = 1024;

/// A conditional weighted composition operator on a fixed space.
#[derive(Debug, Clone)]
pub struct ConditionalWCO {
    space: FiniteMeasureSpace,
    a: Partition,
    phi: Transformation,
    u: MeasFn,
    p: f64,
    eu: MeasFn,
    valid: bool,
}

/// The multiplicative cocycle `w_n(a) = ∏_{i<n} E(u|A)(φⁱ(a))`.
#[derive(Debug, Clone)]
pub struct Cocycle {
    /// Number of factors.
    pub n: usize,
    /// The product function.
    pub w: MeasFn,
}

impl ConditionalWCO {
    /// Builds the operator, caching `E(u|A)` and the validity flag
    /// `φ^{−1}A ⊆ A`.
    pub fn new(
        space: FiniteMeasureSpace,
        a: Partition,
        phi: Transformation,
        u: MeasFn,
        p: f64,
    ) -> Result<Self> {
        if a.atom_count() != space.len() {
            return Err(Error::InvalidInput(format!(
                "partition covers {} atoms, space has {}",
                a.atom_count(),
                space.len()
            )));
        }
        if phi.len() != space.len() {
            return Err(Error::InvalidInput(format!(
                "transformation acts on {} atoms, space has {}",
                phi.len(),
                space.len()
            )));
        }
        if u.len() != space.len() {
            return Err(Error::InvalidInput(format!(
                "weight has {} values, space has {} atoms",
                u.len(),
                space.len()
            )));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "exponent p = {p}; this crate handles finite p >= 1"
            )));
        }
        let eu = cond_exp(&u, &a, &space);
        let valid = crate::measure_space::is_coarser(&pullback_partition(&phi, &a), &a);
        Ok(Self {
            space,
            a,
            phi,
            u,
            p,
            eu,
            valid,
        })
    }

    /// The underlying space.
    pub fn space(&self) -> &FiniteMeasureSpace {
        &self.space
    }

    /// The projection partition `A`.
    pub fn partition(&self) -> &Partition {
        &self.a
    }

    /// The composition map `φ`.
    pub fn phi(&self) -> &Transformation {
        &self.phi
    }

    /// The multiplication weight `u`.
    pub fn u(&self) -> &MeasFn {
        &self.u
    }

    /// The norm exponent `p`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Cached projection `E(u|A)` of the weight.
    pub fn eu(&self) -> &MeasFn {
        &self.eu
    }

    /// Whether `φ^{−1}A ⊆ A`; closed-form power identities require this.
    pub fn is_valid(&self) -> bool {
        self.valid
    }

    /// One application `T f = E(u · f∘φ | A)`.
    pub fn apply(&self, f: &MeasFn) -> MeasFn {
        cond_exp(
            &apply_wco(&self.u, &self.phi, f),
            &self.a,
            &self.space,
        )
    }

    /// `Tⁿ f` by n-fold application; needs no hypotheses beyond the
    /// constructor's.
    pub fn power_iterative(&self, n: usize, f: &MeasFn) -> MeasFn {
        let mut cur = f.clone();
        for _ in 0..n {
            cur = self.apply(&cur);
        }
        cur
    }

    /// `Tⁿ f` with the closed forms cross-checked against iteration.
    ///
    /// Errors with [`Error::Unsupported`] when the validity flag is false
    /// (the closed forms are theorems only under `φ^{−1}A ⊆ A`) and with
    /// [`Error::CrossCheck`] if a closed form strays beyond
    /// [`POWER_XCHECK_TOL`] from the iterative result.
    pub fn power(&self, n: usize, f: &MeasFn) -> Result<MeasFn> {
        if n == 0 {
            return Ok(f.clone());
        }
        let iterative = self.power_iterative(n, f);
        let general = self.closed_power_general(n, f)?;
        let dev = rel_dev(&iterative, &general);
        if dev > POWER_XCHECK_TOL {
            return Err(Error::CrossCheck(format!(
                "closed-form power (general) deviates from iteration by {dev:.3e} at n = {n}"
            )));
        }
        if is_measurable(f, &self.a) {
            let measurable = self.closed_power_measurable(n, f)?;
            let dev = rel_dev(&iterative, &measurable);
            if dev > POWER_XCHECK_TOL {
                return Err(Error::CrossCheck(format!(
                    "closed-form power (measurable) deviates from iteration by {dev:.3e} at n = {n}"
                )));
            }
        }
        Ok(iterative)
    }

    /// Closed form `Tⁿ f = w_{n−1} · (T f)∘φ^{n−1}` for arbitrary `f`,
    /// `n ≥ 1`; requires the validity flag.
    pub fn closed_power_general(&self, n: usize, f: &MeasFn) -> Result<MeasFn> {
        self.require_valid()?;
        if n == 0 {
            return Ok(f.clone());
        }
        let tf = self.apply(f);
        let w = self.cocycle(n - 1).w;
        Ok(w.mul(&self.phi.iterate(n - 1).pullback_fn(&tf)))
    }

    /// Closed form `Tⁿ f = w_n · f∘φⁿ` for block-constant `f`; requires the
    /// validity flag and the measurability of `f`.
    pub fn closed_power_measurable(&self, n: usize, f: &MeasFn) -> Result<MeasFn> {
        self.require_valid()?;
        if !is_measurable(f, &self.a) {
            return Err(Error::InvalidInput(
                "closed measurable power applies only to block-constant functions".into(),
            ));
        }
        let w = self.cocycle(n).w;
        Ok(w.mul(&self.phi.iterate(n).pullback_fn(f)))
    }

    fn require_valid(&self) -> Result<()> {
        if self.valid {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "closed-form power identities need φ^{−1}A ⊆ A, but the pullback of the \
                 projection partition is not coarser than itself here (validity flag false)"
                    .into(),
            ))
        }
    }

    /// The cocycle `w_n` along forward orbits (`w_0 = 1`).
    pub fn cocycle(&self, n: usize) -> Cocycle {
        let len = self.space.len();
        let mut values = vec![1.0; len];
        for (start, value) in values.iter_mut().enumerate() {
            let mut cur = start;
            for _ in 0..n {
                *value *= self.eu.get(cur);
                cur = self.phi.apply(cur);
            }
        }
        Cocycle {
            n,
            w: MeasFn::new(values).expect("finite products of finite factors"),
        }
    }

    /// Fiber functional `J` and the norm bound `‖J‖_∞^{1/p}`.
    ///
    /// `J(b) = Σ_{φ(a)=b} μ(a)|u(a)|^p / μ(b)` on positive atoms, `0` on
    /// null atoms. Errors when `φ` is singular (the weighted composition is
    /// then not an operator on `L^p` classes).
    pub fn bound_j(&self) -> Result<(MeasFn, f64)> {
        let j = bound_j_fn(&self.u, &self.phi, self.p, &self.space)?;
        let all = (0..self.space.len()).collect();
        let sup = sup_norm_on(&j, &all, &self.space).expect("indices in range");
        Ok((j, sup.powf(1.0 / self.p)))
    }

    /// Dense matrix of `T` in the atom basis: column `j` is `T` applied to
    /// the `j`-th atom indicator.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.space.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let e = MeasFn::indicator(&[j].into_iter().collect(), n);
            let te = self.apply(&e);
            for i in 0..n {
                m[(i, j)] = te.get(i);
            }
        }
        m
    }

    /// Exact operator norm on `L²` via the singular values of the
    /// μ-weighted matrix; only for `p = 2`, nonsingular `φ`, and at most
    /// [`P2_EXACT_MAX_ATOMS`] atoms.
    pub fn p2_norm_exact(&self) -> Result<f64> {
        if self.p != 2.0 {
            return Err(Error::InvalidInput(format!(
                "spectral norm applies to p = 2, this operator has p = {}",
                self.p
            )));
        }
        if !is_nonsingular(&self.phi, &self.space).nonsingular {
            return Err(Error::Domain(
                "spectral norm needs a nonsingular transformation".into(),
            ));
        }
        if self.space.len() > P2_EXACT_MAX_ATOMS {
            return Err(Error::Unsupported(format!(
                "dense spectral norm capped at {P2_EXACT_MAX_ATOMS} atoms, space has {}",
                self.space.len()
            )));
        }
        let positive: Vec<usize> = self.space.positive_atoms().collect();
        let m = self.matrix();
        let k = positive.len();
        let mut s = DMatrix::zeros(k, k);
        for (r, &i) in positive.iter().enumerate() {
            for (c, &j) in positive.iter().enumerate() {
                s[(r, c)] =
                    m[(i, j)] * (self.space.weight(i) / self.space.weight(j)).sqrt();
            }
        }
        let svd = s.svd(false, false);
        Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
    }

    /// Best Rayleigh quotient `‖T f‖_p / ‖f‖_p` over a deterministic
    /// candidate family: all positive single-atom indicators, all block
    /// indicators of `A`, `trials` random functions, and (for `p = 2` on
    /// small nonsingular spaces) the top singular function.
    pub fn norm_lower_bound<R: Rng>(&self, trials: usize, rng: &mut R) -> f64 {
        let n = self.space.len();
        let mut candidates: Vec<MeasFn> = Vec::new();
        for b in self.space.positive_atoms() {
            candidates.push(MeasFn::indicator(&[b].into_iter().collect(), n));
        }
        for block in self.a.blocks() {
            candidates.push(MeasFn::indicator(&block.iter().copied().collect(), n));
        }
        for _ in 0..trials {
            let f = MeasFn::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .expect("sampled values are finite");
            candidates.push(f);
        }
        if self.p == 2.0
            && n <= P2_EXACT_MAX_ATOMS
            && is_nonsingular(&self.phi, &self.space).nonsingular
        {
            let positive: Vec<usize> = self.space.positive_atoms().collect();
            let m = self.matrix();
            let k = positive.len();
            let mut s = DMatrix::zeros(k, k);
            for (r, &i) in positive.iter().enumerate() {
                for (c, &j) in positive.iter().enumerate() {
                    s[(r, c)] =
                        m[(i, j)] * (self.space.weight(i) / self.space.weight(j)).sqrt();
                }
            }
            let svd = s.svd(false, true);
            if let Some(v_t) = svd.v_t {
                let top = svd
                    .singular_values
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i);
                if let Some(row) = top {
                    let mut values = vec![0.0; n];
                    for (c, &j) in positive.iter().enumerate() {
                        values[j] = v_t[(row, c)] / self.space.weight(j).sqrt();
                    }
                    if let Ok(f) = MeasFn::new(values) {
                        candidates.push(f);
                    }
                }
            }
        }
        let mut best = 0.0f64;
        for f in &candidates {
            let nf = lp_norm(f, self.p, &self.space).expect("validated p");
            if nf == 0.0 {
                continue;
            }
            let ntf = lp_norm(&self.apply(f), self.p, &self.space).expect("validated p");
            best = best.max(ntf / nf);
        }
        best
    }

    /// Partial right inverse: the function `f_n = (f∘φ^{−n}) / (w_n∘φ^{−n})`
    /// along mass-carrying preimage chains.
    ///
    /// Atoms outside the positive `n`-fold image get `0`; an atom whose
    /// positive preimages carry more than one nonzero `f`-value is
    /// genuinely ambiguous and errors; a zero of `E(u|A)` on the needed
    /// backward orbit errors with [`Error::ZeroDivisor`] naming the atom.
    /// When the validity flag holds, `power(n, right_inverse(f, n)) = f`
    /// on the support of `f`.
    pub fn right_inverse(&self, f: &MeasFn, n: usize) -> Result<MeasFn> {
        assert_eq!(f.len(), self.space.len(), "function/space length mismatch");
        if n == 0 {
            return Ok(f.clone());
        }
        let lists = self.phi.preimage_lists();
        let mut values = vec![0.0; self.space.len()];
        for y in 0..self.space.len() {
            if self.space.is_null_atom(y) {
                continue;
            }
            let mut level: Vec<usize> = vec![y];
            for _ in 0..n {
                let mut next: Vec<usize> = level
                    .iter()
                    .flat_map(|&z| lists[z].iter().copied())
                    .filter(|&x| !self.space.is_null_atom(x))
                    .collect();
                next.sort_unstable();
                next.dedup();
                level = next;
                if level.is_empty() {
                    break;
                }
            }
            let carriers: Vec<usize> = level.into_iter().filter(|&x| f.get(x) != 0.0).collect();
            let x_star = match carriers.as_slice() {
                [] => continue,
                [x] => *x,
                xs => {
                    return Err(Error::Unsupported(format!(
                        "right inverse at atom '{}' is ambiguous: {} mass-carrying preimage \
                         chains reach nonzero values",
                        self.space.id(y),
                        xs.len()
                    )))
                }
            };
            let mut w = 1.0;
            let mut cur = x_star;
            for i in 0..n {
                let factor = self.eu.get(cur);
                if factor == 0.0 {
                    return Err(Error::ZeroDivisor {
                        atom: self.space.id(cur).to_string(),
                        steps: n - i,
                    });
                }
                w *= factor;
                cur = self.phi.apply(cur);
            }
            debug_assert_eq!(cur, y, "preimage chain must close on its endpoint");
            values[y] = f.get(x_star) / w;
        }
        MeasFn::new(values).map_err(|_| {
            Error::Domain("right inverse overflowed to a non-finite value".into())
        })
    }
}

/// The unprojected weighted composition `(u·C_φ)f = u · f∘φ`.
pub fn apply_wco(u: &MeasFn, phi: &Transformation, f: &MeasFn) -> MeasFn {
    u.mul(&phi.pullback_fn(f))
}

/// Fiber p-th-power masses `Σ_{φ(a)=b} μ(a)|u(a)|^p`, summed in atom order.
pub fn wco_preimage_power_mass(
    u: &MeasFn,
    phi: &Transformation,
    p: f64,
    space: &FiniteMeasureSpace,
) -> MeasFn {
    assert_eq!(u.len(), space.len(), "weight/space length mismatch");
    assert_eq!(phi.len(), space.len(), "map/space length mismatch");
    let mut mass = vec![0.0; space.len()];
    for a in 0..space.len() {
        mass[phi.apply(a)] += space.weight(a) * u.get(a).abs().powf(p);
    }
    MeasFn::new(mass).expect("finite masses")
}

fn bound_j_fn(
    u: &MeasFn,
    phi: &Transformation,
    p: f64,
    space: &FiniteMeasureSpace,
) -> Result<MeasFn> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "exponent p = {p}; this crate handles finite p >= 1"
        )));
    }
    if !is_nonsingular(phi, space).nonsingular {
        return Err(Error::Domain(
            "fiber functional undefined: the transformation is singular".into(),
        ));
    }
    let mass = wco_preimage_power_mass(u, phi, p, space);
    let values = (0..space.len())
        .map(|b| {
            if space.is_null_atom(b) {
                0.0
            } else {
                mass.get(b) / space.weight(b)
            }
        })
        .collect();
    Ok(MeasFn::new(values).expect("finite ratios"))
}

/// Exact `L^p → L^p` norm of the unprojected weighted composition
/// `f ↦ u · f∘φ`, namely `‖J‖_∞^{1/p}`.
pub fn wco_norm_exact(
    u: &MeasFn,
    phi: &Transformation,
    p: f64,
    space: &FiniteMeasureSpace,
) -> Result<f64> {
    let j = bound_j_fn(u, phi, p, space)?;
    let all = (0..space.len()).collect();
    Ok(sup_norm_on(&j, &all, space)
        .expect("indices in range")
        .powf(1.0 / p))
}

/// Side-by-side comparison of the fiber functional with its two factored
/// `h · E(|u|^p | ·)∘φ^{−1}` variants (conditioning on the pullback of the
/// discrete partition, and on the operator's own `A`).
#[derive(Debug, Clone)]
pub struct JComparison {
    /// Preimage-mass fiber functional.
    pub j: MeasFn,
    /// `h · E(|u|^p | φ^{−1}Σ)∘φ^{−1}`.
    pub literal_pullback: MeasFn,
    /// `h · E(|u|^p | A)∘φ^{−1}`.
    pub literal_subspace: MeasFn,
    /// Worst relative deviation of the pullback variant from `j`.
    pub dev_pullback: f64,
    /// Worst relative deviation of the `A` variant from `j`.
    pub dev_subspace: f64,
}

/// Computes [`JComparison`]; needs `φ` to restrict to a bijection of the
/// positive atoms so the backward composition is single-valued.
pub fn j_comparison(t: &ConditionalWCO) -> Result<JComparison> {
    let space = t.space();
    let phi = t.phi();
    let inv = positive_inverse(phi, space).ok_or_else(|| {
        Error::Unsupported(
            "fiber functional comparison needs φ to restrict to a bijection of the positive \
             atoms"
                .into(),
        )
    })?;
    let j = bound_j_fn(t.u(), phi, t.p(), space)?;
    let h = is_nonsingular(phi, space).h;
    let u_p = t.u().abs_powf(t.p());
    let pull = pullback_partition(phi, &Partition::discrete(space.len()));
    let e_pull = cond_exp(&u_p, &pull, space);
    let e_sub = cond_exp(&u_p, t.partition(), space);
    let mut lit_pull = vec![0.0; space.len()];
    let mut lit_sub = vec![0.0; space.len()];
    for b in space.positive_atoms() {
        lit_pull[b] = h.get(b) * e_pull.get(inv[b]);
        lit_sub[b] = h.get(b) * e_sub.get(inv[b]);
    }
    let literal_pullback = MeasFn::new(lit_pull).expect("finite");
    let literal_subspace = MeasFn::new(lit_sub).expect("finite");
    Ok(JComparison {
        dev_pullback: rel_dev(&literal_pullback, &j),
        dev_subspace: rel_dev(&literal_subspace, &j),
        j,
        literal_pullback,
        literal_subspace,
    })
}
