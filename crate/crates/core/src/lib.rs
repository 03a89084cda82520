//! Lattice toolkit for free classical and quantum field theories on
//! globally hyperbolic backgrounds.
//!
//! The geometry is a product lattice (time line crossed with a spatial
//! circle) carrying lapse and spatial-metric samples, so every background is
//! globally hyperbolic by construction. On top of that sit:
//!
//! * [`spacetime`] — lattice backgrounds, causal cones, Cauchy slices;
//! * [`greenops`] — sections, pairings, the explicit Cauchy solver,
//!   retarded/advanced Green operators and the advanced-minus-retarded
//!   propagator, plus the identity/duality/exact-sequence checkers;
//! * [`scalar`] — the real scalar field and its symplectic observables;
//! * [`dirac`] — exact gamma-matrix calculus, the spin covariant
//!   derivative, Dirac Green operators via the squaring trick, Hermitian
//!   forms (dynamics on a translation-reduced plane);
//! * [`proca`] — staggered exterior calculus and the massive one-form field;
//! * [`algebra`] — an exact CCR/CAR *-algebra engine with normal-form
//!   rewriting and mechanical causality / time-slice checks.

pub mod algebra;
pub mod convergence;
pub mod dec;
pub mod dirac;
pub mod fiber;
pub mod greenops;
pub mod proca;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod section;
pub mod spacetime;

pub use section::Section;
pub use spacetime::SpacetimeLattice;
