//! Numerical laboratory for conditional weighted composition operators on
//! finite atomic measure spaces.
//!
//! The central object is the operator `T_u f = E(u · f∘φ | A)` built from
//! a weight function `u`, a point transformation `φ`, and a partition `A`
//! standing in for a σ-subalgebra: composition pulls `f` back along `φ`,
//! the weight multiplies, and the conditional expectation projects onto
//! the block-constant functions. Everything lives on a finite list of
//! atoms with nonnegative masses, so each analytic statement about these
//! operators becomes a finite, checkable computation.
//!
//! What the crate measures, per module:
//!
//! - [`measure_space`]: atoms, masses, `L^p` norms, partitions and their
//!   coarsening lattice, measurability, simple-function nets.
//! - [`conditional`]: the block-average projection `E(·|A)` and a
//!   randomized verifier for its projection axioms.
//! - [`transform`]: point maps, pullbacks, change-of-variable densities
//!   `h_n = d(μ∘φ^{−n})/dμ`, normality/periodicity/mixing profiles, and
//!   backward-orbit machinery.
//! - [`operators`]: the operator itself — powers (iterative and closed
//!   form, cross-checked), cocycles `w_n = ∏ E(u|A)∘φ^i`, fiber-mass norm
//!   bounds with an exact `p = 2` spectral route, and right inverses.
//! - [`dynamics`]: orbit sweeps, the periodic-case orbit bound, the
//!   decay quantities `q1 = sup 1/|w_n|` and `q2 = sup h^{1/p}|w_n∘φ^{−n}|`
//!   with an explicit decision rule, a three-bullet transitivity-style
//!   criterion check over a function net, witness search, direct sums.
//! - [`scenarios`]: a canonical JSON scenario format, the bundled
//!   drifting-line example, and the report orchestrator behind the CLI.
//! - [`sampling`]: seeded random spaces, maps, partitions, and operator
//!   instances for property tests.
//!
//! Verdict-style results (decay reports, criterion checks, hypothesis
//! flags) are data, never panics or errors; fallible constructions return
//! [`Result`] with errors that name the offending atom or section.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod conditional;
pub mod dynamics;
pub mod error;
pub mod measure_space;
pub mod operators;
pub mod sampling;
pub mod scenarios;
pub mod transform;

pub use error::{Error, Result};
