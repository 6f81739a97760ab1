//! # ietlab
//!
//! A computational toolkit for interval exchange transformations (i.e.t.s)
//! and their renormalization dynamics:
//!
//! * [`perm`] — combinatorics of irreducible permutations: Rauzy classes,
//!   singularity data σ/Σ(π), genus, the invariant subspace `H(π)` with its
//!   integral lattice, and the alternating spanning vectors `v^(i)`.
//! * [`iet`] — the maps `f(λ, π)` themselves: evaluation, orbits and
//!   itineraries, inverses, finite-depth Keane probing, and the suspension
//!   flow over a positive roof vector.
//! * [`renorm`] — Rauzy induction and Zorich acceleration with their
//!   integer visitation matrices, an independent orbit-counting oracle for
//!   those matrices, Hilbert-metric contraction diagnostics, and induced
//!   locally-constant cocycles on positive-matrix windows.
//! * [`lyap`] — the integral cocycle restricted to `H(π)`: Lyapunov
//!   spectrum estimation with batch-means errors, Oseledets filtration
//!   approximation, and the κ-constrained growth functional ω(κ).
//! * [`wmlab`] — weak-mixing experiments: torus-distance scans along
//!   renormalization returns (Veech's criterion), twisted Birkhoff averages,
//!   `H(π)^⊥` projections, the weak-stable parameter-exclusion probe with
//!   exact replayable certificates, and a Hausdorff-dimension estimator for
//!   the surviving parameter set.
//!
//! Arithmetic is generic over [`scalar::Scalar`]: exact big rationals where
//! equality and tie detection must be decidable, MPFR floats (default 256
//! bits) for long orbits. Integer matrix work ([`linalg`]) is exact
//! throughout; floating point enters only at reporting boundaries.
//!
//! The companion guide (built with mdbook from `book/`) walks through each
//! module with runnable examples; the same text is attached here as doc
//! modules under [`guide`] so `cargo test` keeps the book's code honest.

pub mod guide;
pub mod iet;
pub mod linalg;
pub mod lyap;
pub mod perm;
pub mod renorm;
pub mod scalar;
pub mod wmlab;

pub use iet::{flow_advance, FlowState, Iet, IetError};
pub use perm::{all_irreducible, Permutation, RauzyClass};
pub use scalar::{Lengths, Scalar, DEFAULT_PREC};
