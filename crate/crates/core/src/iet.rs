//! Interval exchange transformations and their suspension flows.
//!
//! An interval exchange transformation (i.e.t.) is determined by a length
//! vector `λ ∈ R^d_+` and an irreducible permutation π of `{1, …, d}`: the
//! half-open interval `I = [0, Σλ_i)` is cut into `d` pieces
//! `I_i = [Σ_{j<i} λ_j, Σ_{j≤i} λ_j)` and the pieces are rearranged by
//! translations so that the i-th piece ends up in π(i)-th position:
//!
//! ```text
//! f(x) = x + ω_i,   ω_i = Σ_{π(j)<π(i)} λ_j − Σ_{j<i} λ_j   for x ∈ I_i.
//! ```
//!
//! Everything is generic over the [`Scalar`] arithmetic mode; exact rational
//! mode makes equality tests (Keane probing, tie detection upstream)
//! meaningful, while MPFR float mode serves long renormalization orbits.
//! Boundary convention: intervals are half-open `[·,·)`, so `f` is defined
//! everywhere on `I` and right-continuous at the discontinuities.

use num::rational::BigRational;

use crate::perm::{PermError, Permutation};
use crate::scalar::Scalar;

/// Errors from i.e.t. construction, evaluation, and the suspension flow.
#[derive(Debug, thiserror::Error)]
pub enum IetError {
    #[error("length vector has {n_lengths} entries but the permutation acts on {d} symbols")]
    DimensionMismatch { n_lengths: usize, d: usize },
    #[error("length lambda_{index} is not strictly positive")]
    NonPositiveLength { index: usize },
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("point {x} is outside the domain [0, {total})")]
    OutOfDomain { x: String, total: String },
    #[error("{op} requires exact rational arithmetic; float mode is rejected")]
    ExactModeRequired { op: &'static str },
    #[error("flow time must be non-negative, got {tau}")]
    NegativeTau { tau: String },
    #[error("roof vector has {n_roof} entries but the map exchanges {d} intervals")]
    RoofDimensionMismatch { n_roof: usize, d: usize },
    #[error("roof component h_{index} is not strictly positive")]
    NonPositiveRoof { index: usize },
    #[error("flow height {height} is not in [0, {roof}) for the current rectangle")]
    HeightOutOfRange { height: String, roof: String },
}

/// The interval exchange map `f(λ, π)`.
///
/// Immutable after construction; the breakpoint and translation tables are
/// precomputed so evaluation is a binary search plus one addition.
#[derive(Clone, Debug)]
pub struct Iet<S: Scalar> {
    lambda: Vec<S>,
    perm: Permutation,
    /// `d + 1` partial sums `0, λ_1, λ_1+λ_2, …, Σλ`.
    breakpoints: Vec<S>,
    /// Translation `ω_i` applied on `I_i`.
    translations: Vec<S>,
}

impl<S: Scalar> Iet<S> {
    /// Build `f(λ, π)`. Lengths must be strictly positive and π irreducible
    /// (in particular the identity permutation is rejected: it exchanges
    /// nothing and renormalization is undefined on it).
    pub fn new(lambda: Vec<S>, perm: Permutation) -> Result<Self, IetError> {
        let d = perm.d();
        if lambda.len() != d {
            return Err(IetError::DimensionMismatch { n_lengths: lambda.len(), d });
        }
        if !perm.is_irreducible() {
            return Err(PermError::Reducible(perm.to_string(), d).into());
        }
        for (i, l) in lambda.iter().enumerate() {
            if !l.is_positive_s() {
                return Err(IetError::NonPositiveLength { index: i + 1 });
            }
        }
        // Breakpoints: partial sums of λ.
        let mut breakpoints = Vec::with_capacity(d + 1);
        let mut acc = lambda[0].zero_like();
        breakpoints.push(acc.clone());
        for l in &lambda {
            acc += l;
            breakpoints.push(acc.clone());
        }
        // Image left endpoints: scan intervals in image order π(i) = 1, 2, …
        // so that left_img[i] = Σ_{π(j) < π(i)} λ_j.
        let mut left_img = vec![lambda[0].zero_like(); d];
        let mut acc = lambda[0].zero_like();
        for v in 0..d {
            let i = perm.preimage0(v);
            left_img[i] = acc.clone();
            acc += &lambda[i];
        }
        let translations = (0..d)
            .map(|i| {
                let mut w = left_img[i].clone();
                w -= &breakpoints[i];
                w
            })
            .collect();
        Ok(Iet { lambda, perm, breakpoints, translations })
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    pub fn lambda(&self) -> &[S] {
        &self.lambda
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    /// Total length `|I| = Σ λ_i`.
    pub fn total(&self) -> S {
        self.breakpoints[self.d()].clone()
    }

    /// The `d + 1` partial sums `0, λ_1, λ_1+λ_2, …, Σλ` (left endpoints
    /// plus the right end of the domain).
    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    /// The translation vector `ω` with `f(x) = x + ω_i` on `I_i`.
    pub fn translations(&self) -> &[S] {
        &self.translations
    }

    /// 0-based index of the interval containing `x` (half-open convention).
    pub fn interval_index(&self, x: &S) -> Result<usize, IetError> {
        let d = self.d();
        if !(x >= &self.breakpoints[0] && x < &self.breakpoints[d]) {
            return Err(IetError::OutOfDomain {
                x: x.to_string(),
                total: self.breakpoints[d].to_string(),
            });
        }
        // Binary search over the breakpoint table: find the last breakpoint ≤ x.
        let mut lo = 0usize; // invariant: breakpoints[lo] ≤ x
        let mut hi = d; // invariant: x < breakpoints[hi]
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < &self.breakpoints[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    /// Apply the map once.
    pub fn evaluate(&self, x: &S) -> Result<S, IetError> {
        let i = self.interval_index(x)?;
        let mut y = x.clone();
        y += &self.translations[i];
        Ok(y)
    }

    /// The forward orbit segment `x, f(x), …, f^{n−1}(x)` together with the
    /// itinerary of 1-based interval symbols `i(f^k(x))`, `k < n`.
    pub fn orbit(&self, x: &S, n: usize) -> Result<(Vec<S>, Vec<usize>), IetError> {
        let mut points = Vec::with_capacity(n);
        let mut itinerary = Vec::with_capacity(n);
        if n == 0 {
            // Still validate the start point so the contract is uniform.
            self.interval_index(x)?;
            return Ok((points, itinerary));
        }
        let mut y = x.clone();
        for step in 0..n {
            let i = self.interval_index(&y)?;
            points.push(y.clone());
            itinerary.push(i + 1);
            if step + 1 < n {
                y += &self.translations[i];
            }
        }
        Ok((points, itinerary))
    }

    /// The inverse map, constructed as an i.e.t. in its own right:
    /// `f(λ, π)⁻¹ = f(λ′, π⁻¹)` with `λ′_j = λ_{π⁻¹(j)}` (the lengths in
    /// image order). Keeping one evaluation code path avoids a second
    /// boundary convention.
    pub fn inverse(&self) -> Iet<S> {
        let d = self.d();
        let lambda_img: Vec<S> =
            (0..d).map(|v| self.lambda[self.perm.preimage0(v)].clone()).collect();
        // π⁻¹ in image form is (π⁻¹(1), …, π⁻¹(d)).
        let inv_perm = Permutation::new((0..d).map(|v| self.perm.preimage0(v) + 1).collect())
            .expect("inverse of a bijection is a bijection");
        Iet::new(lambda_img, inv_perm).expect("inverse of a valid i.e.t. is valid")
    }

    /// Finite-depth Keane test: `true` iff no forward image `f^k(β)`,
    /// `1 ≤ k ≤ depth`, of any singular point `β ∈ {0, β_1, …, β_{d−1}}`
    /// lands exactly on a discontinuity `β_j`, `1 ≤ j ≤ d−1`. (The left
    /// endpoint 0 is probed as a source — it is the seam of the circle
    /// extension — but is not a collision target: some interval always maps
    /// onto offset 0, so counting 0 as a target would fail every map.)
    ///
    /// Exact mode only: float equality would make the answer meaningless.
    /// A `true` result certifies the Keane (infinite distinct orbit)
    /// condition up to the requested depth, nothing more.
    pub fn keane_probe(&self, depth: usize) -> Result<bool, IetError> {
        if !S::EXACT {
            return Err(IetError::ExactModeRequired { op: "keane_probe" });
        }
        let d = self.d();
        let targets: Vec<&S> = self.breakpoints[1..d].iter().collect();
        for beta in &self.breakpoints[..d] {
            let mut y = beta.clone();
            for _ in 0..depth {
                y = self.evaluate(&y)?;
                if targets.iter().any(|t| *t == &y) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// A point of the suspension: base point, height above it, and the roof
/// vector (constant height `h_i` over each `I_i`).
#[derive(Clone, Debug)]
pub struct FlowState<S: Scalar> {
    pub base: S,
    pub height: S,
    pub roof: Vec<S>,
}

impl<S: Scalar> FlowState<S> {
    /// Validate a flow state against its i.e.t.: the roof must be strictly
    /// positive with one component per interval, and the height must satisfy
    /// `0 ≤ height < h_{i(base)}`.
    pub fn new(iet: &Iet<S>, base: S, height: S, roof: Vec<S>) -> Result<Self, IetError> {
        let d = iet.d();
        if roof.len() != d {
            return Err(IetError::RoofDimensionMismatch { n_roof: roof.len(), d });
        }
        for (i, h) in roof.iter().enumerate() {
            if !h.is_positive_s() {
                return Err(IetError::NonPositiveRoof { index: i + 1 });
            }
        }
        let i = iet.interval_index(&base)?;
        let zero = height.zero_like();
        if !(height >= zero && height < roof[i]) {
            return Err(IetError::HeightOutOfRange {
                height: height.to_string(),
                roof: roof[i].to_string(),
            });
        }
        Ok(FlowState { base, height, roof })
    }
}

/// Advance the suspension flow by time `tau ≥ 0`: climb vertically within
/// the current rectangle (`F_s(x, 0) = (x, s)` for `s < h_i`) and apply the
/// base map each time the roof is reached (`F_{h_i}(x, 0) = (f(x), 0)`).
/// In exact mode the elapsed time is accounted with no rounding, so the flow
/// is exactly additive.
pub fn flow_advance<S: Scalar>(
    state: &FlowState<S>,
    iet: &Iet<S>,
    tau: &S,
) -> Result<FlowState<S>, IetError> {
    let zero = tau.zero_like();
    if tau < &zero {
        return Err(IetError::NegativeTau { tau: tau.to_string() });
    }
    if state.roof.len() != iet.d() {
        return Err(IetError::RoofDimensionMismatch { n_roof: state.roof.len(), d: iet.d() });
    }
    let mut base = state.base.clone();
    let mut height = state.height.clone();
    let mut remaining = tau.clone();
    loop {
        let i = iet.interval_index(&base)?;
        // Time left under the roof of the current rectangle.
        let mut headroom = state.roof[i].clone();
        headroom -= &height;
        if &remaining < &headroom {
            height += &remaining;
            return Ok(FlowState { base, height, roof: state.roof.clone() });
        }
        remaining -= &headroom;
        base = iet.evaluate(&base)?;
        height = zero.clone();
    }
}

/// Convenience: build an exact-mode i.e.t. from integer length pairs
/// `(numerator, denominator)`. Used heavily in tests and doc examples.
pub fn iet_from_rationals(
    lengths: &[(i64, i64)],
    perm: &Permutation,
) -> Result<Iet<BigRational>, IetError> {
    let lambda = lengths
        .iter()
        .map(|&(n, d)| BigRational::new(n.into(), d.into()))
        .collect();
    Iet::new(lambda, perm.clone())
}
